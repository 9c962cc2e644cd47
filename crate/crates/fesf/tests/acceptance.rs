//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use fesf::demo::{self, DemoOptions, DemoSummary};
use fesf::pipeline::Source;
use fesf_core::iqem::{discriminator_loss_and_grad, enhance, generator_loss_and_grad, train_enhancer};
use fesf_core::metrics::{psnr, ssim, PairKind};
use fesf_core::nn::Tensor;
use fesf_core::spectral::{fft2, ifft2};
use fesf_core::{build_mask, hide, toy, EnhancerModel, HidingParams, Image, Shape, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_image(rng: &mut ChaCha8Rng, shape: Shape) -> Image {
    Image::from_fn(shape, |_, _, _| rng.random_range(0.0..1.0)).unwrap()
}

fn fft_round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let shapes = [(Shape::new(1, 8, 8), 90), (Shape::new(3, 31, 17), 90), (Shape::new(3, 512, 512), 20)];
    let (mut worst_err, mut worst_parseval, mut count) = (0.0f64, 0.0f64, 0);
    for (shape, n) in shapes {
        for _ in 0..n {
            let x = random_image(&mut rng, shape);
            let s = fft2(&x).unwrap();
            worst_err = worst_err.max(ifft2(&s).image.max_abs_diff(&x).unwrap());
            let spatial: f64 = x.data().iter().map(|v| v * v).sum();
            let freq: f64 = s.data().iter().map(|z| z.norm_sqr()).sum::<f64>() / shape.plane_len() as f64;
            worst_parseval = worst_parseval.max((spatial - freq).abs() / spatial);
            count += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        count == 200 && worst_err < 1e-9 && worst_parseval < 1e-9 && elapsed < Duration::from_secs(30),
        format!("{count} images, max error {worst_err:.2e}, Parseval {worst_parseval:.2e}, {elapsed:.2?}"),
    )
}

fn mask_oracle() -> Outcome {
    let start = Instant::now();
    let mut mismatches = 0;
    let mut cases = 0;
    for h in 4..=32usize {
        for w in 4..=32usize {
            for alpha in [0.0, 0.1, 0.25, 0.4, 0.5] {
                let mask = build_mask(h, w, alpha).unwrap();
                for row in 0..h {
                    for col in 0..w {
                        let m = row as f64 - (h / 2) as f64;
                        let n = col as f64 - (w / 2) as f64;
                        let expected = m.abs() <= alpha * h as f64 && n.abs() <= alpha * w as f64;
                        if mask.get(row, col) != expected {
                            mismatches += 1;
                        }
                    }
                }
                cases += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches == 0 && elapsed < Duration::from_secs(5),
        format!("{cases} masks, {mismatches} mismatched bins, {elapsed:.2?}"),
    )
}

fn degenerate_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let shape = Shape::new(3, 24, 20);
    let (mut worst, mut monotone_failures) = (0.0f64, 0);
    for _ in 0..50 {
        let p = random_image(&mut rng, shape);
        let h = random_image(&mut rng, shape);
        let alpha = rng.random_range(0.01..=0.5);
        let beta = rng.random_range(0.0..=1.0);
        worst = worst.max(hide(&p, &h, HidingParams::new(alpha, 0.0).unwrap()).unwrap().max_abs_diff(&h).unwrap());
        worst = worst.max(hide(&h, &h, HidingParams::new(alpha, beta).unwrap()).unwrap().max_abs_diff(&h).unwrap());
        let mut last = 0.0;
        for beta in [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0] {
            let d = hide(&p, &h, HidingParams::new(alpha, beta).unwrap()).unwrap().l2_distance(&h).unwrap();
            if d + 1e-12 < last {
                monotone_failures += 1;
                break;
            }
            last = d;
        }
    }
    outcome(
        worst < 1e-6 && monotone_failures == 0,
        format!("50 pairs, max identity error {worst:.2e}, monotonicity failures {monotone_failures}"),
    )
}

const N: usize = 8;

fn fixture(f: impl Fn(usize, usize) -> f64) -> Image {
    Image::from_fn(Shape::new(1, N, N), |_, h, w| f(h, w)).unwrap()
}

/// Nested-sum DFT, amplitude blend inside the mask, nested-sum inverse, clamp.
fn direct_hide(plain: &Image, host: &Image, alpha: f64, beta: f64) -> Vec<f64> {
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
    let c = dft(host);
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

fn golden_vector() -> Outcome {
    let host = fixture(|h, w| ((h * 7 + w * w * 3 + h * w * 2 + 1) % 13) as f64 / 12.0);
    let plain = fixture(|h, w| ((h * h + 2 * w) % 9) as f64 / 8.0);
    let expected = direct_hide(&plain, &host, 0.25, 0.5);
    let actual = hide(&plain, &host, HidingParams::new(0.25, 0.5).unwrap()).unwrap();
    let worst = actual.data().iter().zip(&expected).map(|(a, e)| (a - e).abs()).fold(0.0, f64::max);
    outcome(worst < 1e-9, format!("1x8x8 fixture at alpha 0.25, beta 0.5, max deviation {worst:.2e}"))
}

fn gradient_check() -> Outcome {
    const STEP: f64 = 1e-5;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let config = TrainConfig {
        features: 4,
        ..TrainConfig::default()
    };
    let mut model = EnhancerModel::initialize(1, &config).unwrap();
    for p in model.generator.params.iter_mut() {
        *p += rng.random_range(-0.2..0.2);
    }
    for p in model.discriminator.params.iter_mut() {
        *p += rng.random_range(-0.05..0.05);
    }
    let tensor = |rng: &mut ChaCha8Rng| {
        let mut t = Tensor::zeros(1, 8, 8);
        t.data.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.0));
        t
    };
    let xs: Vec<Tensor> = (0..2).map(|_| tensor(&mut rng)).collect();
    let reals: Vec<Tensor> = (0..2).map(|_| tensor(&mut rng)).collect();
    let relative = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
    let lambda = 0.7;

    let (_, _, g_grad) = generator_loss_and_grad(&model, &xs, lambda).unwrap();
    let mut worst_g = 0.0f64;
    for i in 0..g_grad.len() {
        let (mut plus, mut minus) = (model.clone(), model.clone());
        plus.generator.params[i] += STEP;
        minus.generator.params[i] -= STEP;
        let lp = generator_loss_and_grad(&plus, &xs, lambda).unwrap().0;
        let lm = generator_loss_and_grad(&minus, &xs, lambda).unwrap().0;
        worst_g = worst_g.max(relative(g_grad[i], (lp - lm) / (2.0 * STEP)));
    }
    let (_, d_grad) = discriminator_loss_and_grad(&model, &reals, &xs).unwrap();
    let mut worst_d = 0.0f64;
    for i in 0..d_grad.len() {
        let (mut plus, mut minus) = (model.clone(), model.clone());
        plus.discriminator.params[i] += STEP;
        minus.discriminator.params[i] -= STEP;
        let lp = discriminator_loss_and_grad(&plus, &reals, &xs).unwrap().0;
        let lm = discriminator_loss_and_grad(&minus, &reals, &xs).unwrap().0;
        worst_d = worst_d.max(relative(d_grad[i], (lp - lm) / (2.0 * STEP)));
    }
    let (ng, nd) = (model.generator.params.len(), model.discriminator.params.len());
    let nonzero = g_grad.iter().any(|g| *g != 0.0) && d_grad.iter().any(|g| *g != 0.0);
    let elapsed = start.elapsed();
    outcome(
        ng <= 500 && nd <= 500 && nonzero && worst_g < 1e-4 && worst_d < 1e-4 && elapsed < Duration::from_secs(60),
        format!(
            "G {ng} params worst {worst_g:.2e}, D {nd} params worst {worst_d:.2e}, {elapsed:.2?}"
        ),
    )
}

fn iqem_direction() -> Outcome {
    let start = Instant::now();
    let task = toy::color_cast_task(99, 32, 8, 6).unwrap();
    let model = train_enhancer(&task.train, &task.host, &TrainConfig::default()).unwrap();
    let n = task.held_out.len() as f64;
    let before = task.held_out.iter().map(|(h, x)| ssim(h, x).unwrap()).sum::<f64>() / n;
    let after = task
        .held_out
        .iter()
        .map(|(h, x)| ssim(h, &enhance(&model, x).unwrap()).unwrap())
        .sum::<f64>()
        / n;
    let elapsed = start.elapsed();
    outcome(
        after > before && elapsed < Duration::from_secs(600),
        format!("held-out SSIM to host {before:.4} -> {after:.4}, {elapsed:.2?}"),
    )
}

fn metric_goldens() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = random_image(&mut rng, Shape::new(3, 32, 32));
    let self_ssim = ssim(&x, &x).unwrap();
    let s = Shape::new(1, 32, 32);
    let constant = ssim(&Image::filled(s, 0.0).unwrap(), &Image::filled(s, 1.0).unwrap()).unwrap();
    let offset = Image::from_fn(x.shape(), |c, h, w| x.get(c, h, w) * 0.8 + 0.1).unwrap();
    let shifted = Image::from_fn(x.shape(), |c, h, w| offset.get(c, h, w) + 0.1).unwrap();
    let db = psnr(&offset, &shifted).unwrap();
    outcome(
        self_ssim == 1.0 && (constant - 9.999e-5).abs() < 1e-8 && (db - 20.0).abs() < 1e-9,
        format!("ssim(x,x) {self_ssim}, constant pair {constant:.8e}, psnr at 0.1 offset {db:.12} dB"),
    )
}

fn privacy_proxy(run: &DemoSummary) -> Outcome {
    let r = &run.evaluation.report;
    let host = r.summary(PairKind::HostRefined).ssim_mean;
    let plain = r.summary(PairKind::PlaintextRefined).ssim_mean;
    outcome(
        host > plain && run.evaluation.entry_errors.is_empty(),
        format!("mean SSIM(host, refined) {host:.4} vs SSIM(plaintext, refined) {plain:.4} over {} entries", r.summaries[0].count),
    )
}

/// Mean amplitude at each class bin, grouped by true class, from the surrogates.
fn class_bin_amplitudes(run: &DemoSummary, classes: usize) -> Vec<Vec<f64>> {
    let root = run.manifest_path.parent().unwrap();
    let mut sums = vec![vec![0.0; classes]; classes];
    let mut counts = vec![0usize; classes];
    for e in &run.manifest.entries {
        let img = fesf::imageio::load(&root.join(e.surrogate.as_ref().unwrap()), 3, None).unwrap();
        let s = fft2(&img).unwrap();
        for (bin, sum) in sums[e.label].iter_mut().enumerate() {
            let (m, n) = toy::class_frequency(bin);
            *sum += (0..3).map(|c| s.at_frequency(c, m as isize, n as isize).norm()).sum::<f64>() / 3.0;
        }
        counts[e.label] += 1;
    }
    for (row, n) in sums.iter_mut().zip(&counts) {
        row.iter_mut().for_each(|v| *v /= *n as f64);
    }
    sums
}

fn utility(run: &DemoSummary, classes: usize, elapsed: Duration) -> Outcome {
    let pick = |source: Source, shuffled: bool| {
        run.utility
            .iter()
            .find(|u| u.trained_on == source && u.shuffled_labels == shuffled)
            .unwrap()
    };
    let surrogate = pick(Source::Surrogate, false);
    let refined = pick(Source::Refined, false);
    let control = pick(Source::Surrogate, true);
    let amps = class_bin_amplitudes(run, classes);
    // each class's own bin carries more amplitude than that bin in the other classes
    let signal = (0..classes).all(|k| (0..classes).filter(|&j| j != k).all(|j| amps[k][k] > amps[j][k]));
    let pass = surrogate.test.accuracy > 0.8
        && (control.test.accuracy - control.chance).abs() <= 0.1
        && refined.test.accuracy >= surrogate.test.accuracy
        && signal
        && elapsed < Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "surrogate {:.4}, refined {:.4}, shuffled {:.4} over {} permutations (chance {:.2}), class-bin amplitudes {amps:.3?}, {elapsed:.2?}",
            surrogate.test.accuracy, refined.test.accuracy, control.test.accuracy, control.permutations, control.chance
        ),
    )
}

fn determinism(a: &Path, b: &Path) -> Outcome {
    let files = ["manifest.jsonl", "report.txt", "report.jsonl", "utility.json", "utility.txt"];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| fs::read(a.join(f)).unwrap() != fs::read(b.join(f)).unwrap())
        .collect();
    outcome(differing.is_empty(), format!("compared {files:?}, differing {differing:?}"))
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("fft round trip", fft_round_trip()),
        ("mask oracle", mask_oracle()),
        ("degenerate hide identities", degenerate_identities()),
        ("golden vector hide", golden_vector()),
        ("gan gradient check", gradient_check()),
        ("iqem direction", iqem_direction()),
        ("metric golden values", metric_goldens()),
    ];

    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let first = demo::run(&DemoOptions::new(dir.path().join("a"))).unwrap();
    let elapsed = start.elapsed();
    let classes = first.manifest.header.classes.len();
    demo::run(&DemoOptions::new(dir.path().join("b"))).unwrap();
    results.push(("privacy proxy", privacy_proxy(&first)));
    results.push(("utility", utility(&first, classes, elapsed)));
    results.push(("determinism", determinism(&dir.path().join("a"), &dir.path().join("b"))));

    let mut failed = 0;
    for (name, o) in &results {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
