//! Complex FFT for arbitrary lengths.
//!
//! Powers of two use an iterative radix-2 transform. Every other length goes
//! through Bluestein's chirp-z reformulation on top of a power-of-two
//! convolution, so odd image sizes cost at most a constant factor more.
//!
//! All transforms are unnormalized in both directions.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// A reusable plan for one transform length.
#[derive(Debug, Clone)]
pub struct Fft {
    len: usize,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Trivial,
    Radix2(Radix2),
    Bluestein(Bluestein),
}

#[derive(Debug, Clone)]
struct Radix2 {
    len: usize,
    // e^{-2πik/len} for k < len/2
    twiddles: Vec<Complex64>,
}

#[derive(Debug, Clone)]
struct Bluestein {
    inner: Radix2,
    // e^{-iπk²/len} for k < len
    chirp: Vec<Complex64>,
    // forward transform of the conjugate chirp, wrapped to the inner length
    kernel: Vec<Complex64>,
}

fn unit(angle: f64) -> Complex64 {
    Complex64::new(libm::cos(angle), libm::sin(angle))
}

impl Radix2 {
    fn new(len: usize) -> Self {
        debug_assert!(len.is_power_of_two());
        let twiddles = (0..len / 2)
            .map(|k| unit(-2.0 * PI * k as f64 / len as f64))
            .collect();
        Self { len, twiddles }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        let n = self.len;
        let bits = n.trailing_zeros();
        if bits == 0 {
            return;
        }
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut half = 1;
        while half < n {
            let stride = n / (2 * half);
            for start in (0..n).step_by(2 * half) {
                for k in 0..half {
                    let t = self.twiddles[k * stride] * buf[start + k + half];
                    let u = buf[start + k];
                    buf[start + k] = u + t;
                    buf[start + k + half] = u - t;
                }
            }
            half *= 2;
        }
    }
}

impl Bluestein {
    fn new(len: usize) -> Self {
        let inner_len = (2 * len - 1).next_power_of_two();
        let inner = Radix2::new(inner_len);
        // k² mod 2·len keeps the chirp angle small and exact for large k.
        let modulus = 2 * len as u128;
        let chirp: Vec<Complex64> = (0..len)
            .map(|k| {
                let k2 = ((k as u128 * k as u128) % modulus) as f64;
                unit(-PI * k2 / len as f64)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); inner_len];
        kernel[0] = chirp[0].conj();
        for k in 1..len {
            kernel[k] = chirp[k].conj();
            kernel[inner_len - k] = chirp[k].conj();
        }
        inner.forward(&mut kernel);
        Self {
            inner,
            chirp,
            kernel,
        }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        let m = self.inner.len;
        let mut work = vec![Complex64::new(0.0, 0.0); m];
        for (w, (x, c)) in work.iter_mut().zip(buf.iter().zip(&self.chirp)) {
            *w = x * c;
        }
        self.inner.forward(&mut work);
        for (w, k) in work.iter_mut().zip(&self.kernel) {
            // conjugate here so the next forward pass computes an inverse
            *w = (*w * k).conj();
        }
        self.inner.forward(&mut work);
        let scale = 1.0 / m as f64;
        for (x, (w, c)) in buf.iter_mut().zip(work.iter().zip(&self.chirp)) {
            *x = w.conj() * c * scale;
        }
    }
}

impl Fft {
    /// # Panics
    /// If `len` is zero.
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "FFT length must be positive");
        let kind = if len == 1 {
            Kind::Trivial
        } else if len.is_power_of_two() {
            Kind::Radix2(Radix2::new(len))
        } else {
            Kind::Bluestein(Bluestein::new(len))
        };
        Self { len, kind }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Transforms `buf` in place. `buf.len()` must equal the plan length.
    pub fn process(&self, buf: &mut [Complex64], direction: Direction) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        if direction == Direction::Inverse {
            buf.iter_mut().for_each(|x| *x = x.conj());
        }
        match &self.kind {
            Kind::Trivial => {}
            Kind::Radix2(r) => r.forward(buf),
            Kind::Bluestein(b) => b.forward(buf),
        }
        if direction == Direction::Inverse {
            buf.iter_mut().for_each(|x| *x = x.conj());
        }
    }
}

/// Row/column plan for `height`×`width` planes stored row-major.
#[derive(Debug, Clone)]
pub struct Fft2d {
    rows: Fft,
    cols: Fft,
}

impl Fft2d {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            rows: Fft::new(width),
            cols: Fft::new(height),
        }
    }

    pub fn process(&self, plane: &mut [Complex64], direction: Direction) {
        let (h, w) = (self.cols.len(), self.rows.len());
        assert_eq!(plane.len(), h * w, "plane length does not match plan");
        for row in plane.chunks_exact_mut(w) {
            self.rows.process(row, direction);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); h];
        for x in 0..w {
            for (y, c) in column.iter_mut().enumerate() {
                *c = plane[y * w + x];
            }
            self.cols.process(&mut column, direction);
            for (y, c) in column.iter().enumerate() {
                plane[y * w + x] = *c;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_dft(input: &[Complex64]) -> Vec<Complex64> {
        let n = input.len();
        (0..n)
            .map(|k| {
                input
                    .iter()
                    .enumerate()
                    .map(|(j, x)| x * unit(-2.0 * PI * ((j * k) % n) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_for_many_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=70 {
            let input: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let expected = naive_dft(&input);
            let mut buf = input.clone();
            Fft::new(n).process(&mut buf, Direction::Forward);
            for (a, b) in buf.iter().zip(&expected) {
                assert!((a - b).norm() < 1e-10 * n as f64, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn inverse_undoes_forward_up_to_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [2usize, 3, 17, 31, 64, 100, 512] {
            let input: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let plan = Fft::new(n);
            let mut buf = input.clone();
            plan.process(&mut buf, Direction::Forward);
            plan.process(&mut buf, Direction::Inverse);
            for (a, b) in buf.iter().zip(&input) {
                assert!((a / n as f64 - b).norm() < 1e-12);
            }
        }
    }
}
