//! Per-channel 2D spectra in centered coordinates.
//!
//! A [`Spectrum`] always stores the DC bin at `(⌊H/2⌋, ⌊W/2⌋)`; row index `i`
//! holds vertical frequency `m = i − ⌊H/2⌋`, so
//! `m ∈ {−⌊H/2⌋, …, ⌈H/2⌉ − 1}` (likewise for columns). The forward
//! transform is unnormalized and the inverse carries the `1/(H·W)` factor.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

pub use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{Direction, Fft2d};
use crate::image::{Image, Shape};

/// Complex C×H×W frequency representation, DC-centered.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    shape: Shape,
    data: Vec<Complex64>,
}

/// Modulus/argument split of a [`Spectrum`].
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudePhase {
    pub shape: Shape,
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
}

/// Output of [`ifft2`]: the real part plus the largest imaginary magnitude
/// that was discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub image: Image,
    pub max_imag_residue: f64,
}

/// Signed frequency held at centered index `index` along an axis of `len` bins.
#[inline]
pub fn centered_frequency(index: usize, len: usize) -> isize {
    index as isize - (len / 2) as isize
}

impl Spectrum {
    pub fn new(shape: Shape, data: Vec<Complex64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::Empty("spectrum with a zero dimension"));
        }
        if data.len() != shape.len() {
            return Err(Error::DataLength {
                shape,
                len: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, c: usize, row: usize, col: usize) -> Complex64 {
        self.data[self.shape.index(c, row, col)]
    }

    /// Value at signed frequency `(m, n)` of channel `c`.
    pub fn at_frequency(&self, c: usize, m: isize, n: isize) -> Complex64 {
        let row = (m + (self.shape.height / 2) as isize) as usize;
        let col = (n + (self.shape.width / 2) as isize) as usize;
        self.get(c, row, col)
    }

    pub fn dc_index(&self) -> (usize, usize) {
        (self.shape.height / 2, self.shape.width / 2)
    }
}

/// Moves bin `(i, j)` of an unshifted plane to `(i + ⌊H/2⌋, j + ⌊W/2⌋) mod (H, W)`.
fn shift_plane(src: &[Complex64], dst: &mut [Complex64], height: usize, width: usize, inverse: bool) {
    let (dh, dw) = (height / 2, width / 2);
    for i in 0..height {
        for j in 0..width {
            let (si, sj) = ((i + dh) % height, (j + dw) % width);
            if inverse {
                dst[i * width + j] = src[si * width + sj];
            } else {
                dst[si * width + sj] = src[i * width + j];
            }
        }
    }
}

/// Forward 2D DFT of every channel, DC-centered.
pub fn fft2(image: &Image) -> Result<Spectrum> {
    let shape = image.shape();
    if let Some(index) = image.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let plan = Fft2d::new(shape.height, shape.width);
    let n = shape.plane_len();
    let mut data = vec![Complex64::new(0.0, 0.0); shape.len()];
    let mut work = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..shape.channels {
        for (w, v) in work.iter_mut().zip(image.plane(c)) {
            *w = Complex64::new(*v, 0.0);
        }
        plan.process(&mut work, Direction::Forward);
        shift_plane(
            &work,
            &mut data[c * n..(c + 1) * n],
            shape.height,
            shape.width,
            false,
        );
    }
    Ok(Spectrum { shape, data })
}

/// Inverse of [`fft2`]. The imaginary part is dropped and nothing is clamped.
pub fn ifft2(spectrum: &Spectrum) -> Reconstruction {
    let shape = spectrum.shape;
    let plan = Fft2d::new(shape.height, shape.width);
    let n = shape.plane_len();
    let scale = 1.0 / n as f64;
    let mut out = Vec::with_capacity(shape.len());
    let mut work = vec![Complex64::new(0.0, 0.0); n];
    let mut residue = 0.0f64;
    for c in 0..shape.channels {
        shift_plane(
            &spectrum.data[c * n..(c + 1) * n],
            &mut work,
            shape.height,
            shape.width,
            true,
        );
        plan.process(&mut work, Direction::Inverse);
        for z in &work {
            out.push(z.re * scale);
            residue = residue.max((z.im * scale).abs());
        }
    }
    Reconstruction {
        image: Image::from_raw(shape, out),
        max_imag_residue: residue,
    }
}

/// Element-wise modulus and argument. Zero bins get phase 0.
pub fn decompose(spectrum: &Spectrum) -> AmplitudePhase {
    let (amplitude, phase) = spectrum
        .data
        .iter()
        .map(|z| {
            let phase = if z.re == 0.0 && z.im == 0.0 {
                0.0
            } else {
                // atan2 returns −π for a negative-zero imaginary part
                let p = libm::atan2(z.im, z.re);
                if p == -PI {
                    PI
                } else {
                    p
                }
            };
            (libm::hypot(z.re, z.im), phase)
        })
        .unzip();
    AmplitudePhase {
        shape: spectrum.shape,
        amplitude,
        phase,
    }
}

/// Euler recomposition `A·(cos φ + i sin φ)`.
pub fn recompose(ap: &AmplitudePhase) -> Result<Spectrum> {
    let len = ap.shape.len();
    if ap.amplitude.len() != len || ap.phase.len() != len {
        return Err(Error::DataLength {
            shape: ap.shape,
            len: ap.amplitude.len().min(ap.phase.len()),
        });
    }
    let mut data = Vec::with_capacity(len);
    for (index, (&a, &p)) in ap.amplitude.iter().zip(&ap.phase).enumerate() {
        if a < 0.0 {
            return Err(Error::NegativeAmplitude { index, value: a });
        }
        data.push(Complex64::new(a * libm::cos(p), a * libm::sin(p)));
    }
    Spectrum::new(ap.shape, data)
}
