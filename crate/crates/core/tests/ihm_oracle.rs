//! Amplitude exchange against a direct-DFT oracle, plus mask enumeration and
//! the degenerate-parameter identities.

use fesf_core::ihm::{self, build_mask, HidingParams};
use fesf_core::spectral::{decompose, fft2};
use fesf_core::{Image, Shape};
use proptest::prelude::*;
use std::f64::consts::PI;

const N: usize = 8;

fn vector(f: impl Fn(usize, usize) -> f64) -> Image {
    Image::from_fn(Shape::new(1, N, N), |_, h, w| f(h, w)).unwrap()
}

fn host_vector() -> Image {
    vector(|h, w| ((h * 7 + w * w * 3 + h * w * 2 + 1) % 13) as f64 / 12.0)
}

fn plain_vector() -> Image {
    vector(|h, w| ((h * h + 2 * w) % 9) as f64 / 8.0)
}

fn surrogate_vector() -> Image {
    vector(|h, w| ((h * 7 + w * w) % 10) as f64 / 9.0)
}

// Frozen output of the straight-line oracle below (also reproduced
// independently outside this crate with plain nested sums). Every bin of
// every test vector has amplitude > 0.1, so the carrier phase is well defined.
const HIDE_GOLDEN: [f64; 64] = [
    0.10716893708866981, 0.2863601183113923, 0.0, 0.20630423544792897, 0.8385312816887287, 0.8787933098987127, 0.43284631432252696, 0.4917617187393529,
    0.6612751321509106, 0.0019963228841739715, 0.9462769389615246, 0.12657915192533298, 0.9049125153883053, 0.16485721717392054, 1.0, 0.08295594199736217,
    0.13534295837451765, 0.7688987155241701, 0.777157313327677, 0.1259448835607852, 0.04666386650824121, 0.5662765638889111, 0.4328388009074236, 0.6808827761439852,
    0.7238603947389114, 0.3961139969160822, 0.6015980369802939, 0.21289287319255124, 0.2987185289513209, 0.8789626531066675, 0.8703353699374438, 0.2565428073926684,
    0.2620332414532297, 0.05286448812732938, 0.43431053373955325, 0.22011411915467172, 0.4280124754830161, 0.07407499272738738, 0.2983274829799483, 0.9922968003130266,
    0.8815364326769295, 0.8426777238628355, 0.23614466009450308, 0.13525861646727227, 0.553951128927062, 0.4313041968336172, 0.8212155937071846, 0.5836072782419522,
    0.3896062454176066, 0.5127860826294898, 0.016049970614988765, 0.12440961632339043, 0.800103971099987, 0.8109210894217189, 0.1736254243630993, 0.09793548978774327,
    0.9608127561006121, 0.1301213609292905, 0.9281710309433476, 0.2020422129016222, 1.0, 0.021608555489193066, 0.6154963447816507, 0.7564374240187924,
];
const REFINE_GOLDEN: [f64; 64] = [
    0.007837037992210295, 0.0995026528546859, 0.46007684584965036, 0.9948104707873373, 0.6188067092152948, 0.5384814255253719, 0.6703202307949399, 0.9768648516389069,
    0.7701209492232445, 0.8654765880326911, 0.1286425154140284, 0.6887950195564475, 0.3536704897244064, 0.22203398082318285, 0.3190332480019542, 0.6521311435474296,
    0.46254957861284474, 0.5450939049882879, 0.908371151833246, 0.33265561028820706, 0.0, 1.0, 0.0, 0.33261372016337326,
    0.12643522767552576, 0.2674095346213304, 0.5882116795512656, 0.018900462589107478, 0.7405759678391514, 0.6545972150644099, 0.7709458862823109, 0.0,
    0.8731541345722641, 1.0, 0.21859013444254605, 0.7733552647597017, 0.46579674790148595, 0.31480796990116755, 0.39985710620025766, 0.7720904787975688,
    0.5295223502579278, 0.6754217274259481, 0.9878158680792785, 0.4484534933342148, 0.10171811354910665, 0.0260446920211146, 0.12996731701274233, 0.45607326571389717,
    0.2156660486151758, 0.35545038981275745, 0.6716880631115689, 0.13212326967125898, 0.8724174593843746, 0.7416012689131165, 0.8585929639301251, 0.12039317176415543,
    1.0, 0.007688694638190302, 0.3314476136549474, 0.8962791585642191, 0.5544001403438942, 0.42539597306087973, 0.5027298991463905, 0.8944589368134811,
];

/// Direct nested-sum DFT → amplitude blend → inverse DFT, one 8×8 channel.
fn oracle(plain: &Image, carrier: &Image, alpha: f64, beta: f64) -> Vec<f64> {
    let n = N as f64;
    let dft = |img: &Image| {
        let mut out = vec![(0.0, 0.0); N * N];
        for k in 0..N {
            for l in 0..N {
                let (mut re, mut im) = (0.0, 0.0);
                for h in 0..N {
                    for w in 0..N {
                        let ang = -2.0 * PI * ((h * k) as f64 / n + (w * l) as f64 / n);
                        re += img.get(0, h, w) * ang.cos();
                        im += img.get(0, h, w) * ang.sin();
                    }
                }
                out[k * N + l] = (re, im);
            }
        }
        out
    };
    let freq = |k: usize| if k < N - N / 2 { k as f64 } else { k as f64 - n };
    let p = dft(plain);
    let c = dft(carrier);
    let mut spec = vec![(0.0, 0.0); N * N];
    for k in 0..N {
        for l in 0..N {
            let (cre, cim) = c[k * N + l];
            let (pre, pim) = p[k * N + l];
            let ac = (cre * cre + cim * cim).sqrt();
            let ap = (pre * pre + pim * pim).sqrt();
            let phase = if cre == 0.0 && cim == 0.0 { 0.0 } else { cim.atan2(cre) };
            let inside = freq(k).abs() <= alpha * n && freq(l).abs() <= alpha * n;
            let a = if inside { (1.0 - beta) * ac + beta * ap } else { ac };
            spec[k * N + l] = (a * phase.cos(), a * phase.sin());
        }
    }
    let mut out = Vec::with_capacity(N * N);
    for h in 0..N {
        for w in 0..N {
            let mut re = 0.0;
            for k in 0..N {
                for l in 0..N {
                    let ang = 2.0 * PI * ((h * k) as f64 / n + (w * l) as f64 / n);
                    let (sre, sim) = spec[k * N + l];
                    re += sre * ang.cos() - sim * ang.sin();
                }
            }
            out.push((re / (n * n)).clamp(0.0, 1.0));
        }
    }
    out
}

fn assert_close(actual: &[f64], expected: &[f64], tol: f64) {
    for (i, (a, e)) in actual.iter().zip(expected).enumerate() {
        assert!((a - e).abs() < tol, "index {i}: {a} vs {e}");
    }
}

#[test]
fn oracle_reproduces_frozen_vectors() {
    assert_close(&oracle(&plain_vector(), &host_vector(), 0.25, 0.5), &HIDE_GOLDEN, 1e-12);
    assert_close(&oracle(&plain_vector(), &surrogate_vector(), 0.5, 0.1), &REFINE_GOLDEN, 1e-12);
}

#[test]
fn hide_matches_golden_vector() {
    let out = ihm::hide(&plain_vector(), &host_vector(), HidingParams::new(0.25, 0.5).unwrap()).unwrap();
    assert_close(out.data(), &HIDE_GOLDEN, 1e-9);
}

#[test]
fn refine_matches_golden_vector() {
    let out = ihm::refine(&surrogate_vector(), &plain_vector(), HidingParams::REFINE_DEFAULT).unwrap();
    assert_close(out.data(), &REFINE_GOLDEN, 1e-9);
}

#[test]
fn mask_matches_enumeration_and_cardinality() {
    for h in 1..=32usize {
        for w in 1..=32usize {
            for alpha in [0.0, 0.1, 0.2, 0.25, 0.3, 0.4, 0.5] {
                let mask = build_mask(h, w, alpha).unwrap();
                for r in 0..h {
                    for c in 0..w {
                        let m = r as f64 - (h / 2) as f64;
                        let n = c as f64 - (w / 2) as f64;
                        let expected = m.abs() <= alpha * h as f64 && n.abs() <= alpha * w as f64;
                        assert_eq!(mask.get(r, c), expected, "{h}x{w} α={alpha} ({r},{c})");
                        // point symmetry about DC where the mirror exists
                        let (mr, mc) = (2 * (h / 2)).checked_sub(r).zip((2 * (w / 2)).checked_sub(c)).unwrap_or((h, w));
                        if mr < h && mc < w {
                            assert_eq!(mask.get(r, c), mask.get(mr, mc));
                        }
                    }
                }
                let rows = (2 * (alpha * h as f64).floor() as usize + 1).min(h);
                let cols = (2 * (alpha * w as f64).floor() as usize + 1).min(w);
                assert_eq!(mask.count_ones(), rows * cols, "{h}x{w} α={alpha}");
            }
        }
    }
}

fn image_strategy(shape: Shape) -> impl Strategy<Value = Image> {
    proptest::collection::vec(0.0f64..=1.0, shape.len())
        .prop_map(move |d| Image::new(shape, d).unwrap())
}

fn pair_strategy() -> impl Strategy<Value = (Image, Image)> {
    (1usize..=3, 4usize..=20, 4usize..=20).prop_flat_map(|(c, h, w)| {
        let s = Shape::new(c, h, w);
        (image_strategy(s), image_strategy(s))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn degenerate_hide_is_identity((plain, host) in pair_strategy(), alpha in 0.0f64..=0.5, beta in 0.0f64..=1.0) {
        let zero = ihm::hide(&plain, &host, HidingParams::new(alpha, 0.0).unwrap()).unwrap();
        prop_assert!(zero.max_abs_diff(&host).unwrap() < 1e-6);
        let same = ihm::hide(&host, &host, HidingParams::new(alpha, beta).unwrap()).unwrap();
        prop_assert!(same.max_abs_diff(&host).unwrap() < 1e-6);
        let refined = ihm::refine(&host, &plain, HidingParams::new(alpha, 0.0).unwrap()).unwrap();
        prop_assert!(refined.max_abs_diff(&host).unwrap() < 1e-6);
    }

    #[test]
    fn distance_to_host_grows_with_beta((plain, host) in pair_strategy(), alpha in 0.05f64..=0.5) {
        let mut last = 0.0;
        for beta in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let out = ihm::hide(&plain, &host, HidingParams::new(alpha, beta).unwrap()).unwrap();
            let d = out.l2_distance(&host).unwrap();
            prop_assert!(d + 1e-12 >= last, "β={beta}: {d} < {last}");
            last = d;
        }
    }

    #[test]
    fn output_stays_in_unit_range((plain, host) in pair_strategy(), alpha in 0.0f64..=0.5, beta in 0.0f64..=1.0) {
        let p = HidingParams::new(alpha, beta).unwrap();
        prop_assert!(ihm::hide(&plain, &host, p).unwrap().in_unit_range());
        prop_assert!(ihm::refine(&host, &plain, p).unwrap().in_unit_range());
    }

    #[test]
    fn host_phase_survives_where_amplitude_is_significant((plain, host) in pair_strategy(), alpha in 0.0f64..=0.5, beta in 0.0f64..=1.0) {
        let rec = ihm::synthesize(&plain, &host, HidingParams::new(alpha, beta).unwrap()).unwrap();
        let syn = decompose(&fft2(&rec.image).unwrap());
        let hst = decompose(&fft2(&host).unwrap());
        // Dropping the imaginary residue symmetrizes the spectrum, so compare
        // the phase only where the recomposed spectrum was already Hermitian:
        // the blended spectrum of two real images is Hermitian whenever the
        // mask is point-symmetric, which holds except on the unpaired
        // Nyquist row/column of even sizes.
        let s = host.shape();
        for c in 0..s.channels {
            for r in 0..s.height {
                for col in 0..s.width {
                    let i = s.index(c, r, col);
                    let unpaired = (s.height % 2 == 0 && r == 0) || (s.width % 2 == 0 && col == 0);
                    if unpaired || syn.amplitude[i] < 1e-6 {
                        continue;
                    }
                    let mut d = (syn.phase[i] - hst.phase[i]).abs();
                    d = d.min(2.0 * PI - d);
                    prop_assert!(d < 1e-6, "phase moved by {d} at {c},{r},{col}");
                }
            }
        }
    }
}

