//! Low-frequency amplitude exchange.
//!
//! The plaintext's amplitude spectrum is mixed into the host's inside a
//! centered rectangular mask, the host phase is kept, and the result is
//! brought back to pixels:
//!
//! ```text
//! A_syn = [(1 − β)·A_host + β·A_plain] ⊙ M + A_host ⊙ (1 − M)
//! x_syn = clamp(F⁻¹(A_syn, P_host))
//! ```

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{Image, Shape};
use crate::spectral::{self, centered_frequency, AmplitudePhase, Reconstruction};

/// Mask half-extent `alpha` and blend intensity `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HidingParams {
    alpha: f64,
    beta: f64,
}

impl HidingParams {
    pub const MAX_ALPHA: f64 = 0.5;

    /// First-pass setting used for the reported experiments (α = 0.5, β = 0.5).
    pub const HIDE_DEFAULT: HidingParams = HidingParams {
        alpha: 0.5,
        beta: 0.5,
    };

    /// Refinement setting used for the reported experiments (α′ = 0.5, β′ = 0.1).
    pub const REFINE_DEFAULT: HidingParams = HidingParams {
        alpha: 0.5,
        beta: 0.1,
    };

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        Error::check_range("alpha", alpha, 0.0, Self::MAX_ALPHA)?;
        Error::check_range("beta", beta, 0.0, 1.0)?;
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Binary low-pass mask over centered frequency coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl FrequencyMask {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// `M(m, n) = 1` iff `|m| ≤ α·H` and `|n| ≤ α·W`.
///
/// Because `m` and `n` are integers the bound is effectively `⌊α·H⌋`, so the
/// ones always form a `(2⌊αH⌋+1) × (2⌊αW⌋+1)` block around DC, truncated to
/// the plane.
pub fn build_mask(height: usize, width: usize, alpha: f64) -> Result<FrequencyMask> {
    Error::check_range("alpha", alpha, 0.0, HidingParams::MAX_ALPHA)?;
    if height == 0 || width == 0 {
        return Err(Error::Empty("mask with a zero dimension"));
    }
    let (row_bound, col_bound) = (alpha * height as f64, alpha * width as f64);
    let mut data = Vec::with_capacity(height * width);
    for row in 0..height {
        let m = centered_frequency(row, height).unsigned_abs() as f64;
        for col in 0..width {
            let n = centered_frequency(col, width).unsigned_abs() as f64;
            data.push(m <= row_bound && n <= col_bound);
        }
    }
    Ok(FrequencyMask {
        height,
        width,
        data,
    })
}

/// Mixes `plain` into `host` inside the mask; the mask is shared by all channels.
pub fn blend_amplitude(
    host: &[f64],
    plain: &[f64],
    shape: Shape,
    mask: &FrequencyMask,
    beta: f64,
) -> Result<Vec<f64>> {
    Error::check_range("beta", beta, 0.0, 1.0)?;
    if host.len() != shape.len() || plain.len() != shape.len() {
        return Err(Error::DataLength {
            shape,
            len: if host.len() != shape.len() {
                host.len()
            } else {
                plain.len()
            },
        });
    }
    if (mask.height, mask.width) != (shape.height, shape.width) {
        return Err(Error::ShapeMismatch {
            expected: shape,
            found: Shape::new(shape.channels, mask.height, mask.width),
        });
    }
    let plane = shape.plane_len();
    Ok(host
        .iter()
        .zip(plain)
        .enumerate()
        .map(|(i, (&h, &p))| {
            if mask.data[i % plane] {
                (1.0 - beta) * h + beta * p
            } else {
                h
            }
        })
        .collect())
}

/// [`hide`] without the final clamp, exposing the discarded imaginary residue.
pub fn synthesize(plaintext: &Image, host: &Image, params: HidingParams) -> Result<Reconstruction> {
    host.shape().expect(plaintext.shape())?;
    let shape = host.shape();
    let host_ap = spectral::decompose(&spectral::fft2(host)?);
    let plain_ap = spectral::decompose(&spectral::fft2(plaintext)?);
    let mask = build_mask(shape.height, shape.width, params.alpha)?;
    let amplitude = blend_amplitude(
        &host_ap.amplitude,
        &plain_ap.amplitude,
        shape,
        &mask,
        params.beta,
    )?;
    let spectrum = spectral::recompose(&AmplitudePhase {
        shape,
        amplitude,
        phase: host_ap.phase,
    })?;
    Ok(spectral::ifft2(&spectrum))
}

/// Conceals `plaintext` in `host`. Shapes must already agree.
pub fn hide(plaintext: &Image, host: &Image, params: HidingParams) -> Result<Image> {
    Ok(synthesize(plaintext, host, params)?.image.clamped())
}

/// Second, low-intensity pass: the surrogate carries, the plaintext supplies amplitude.
pub fn refine(surrogate: &Image, plaintext: &Image, params_prime: HidingParams) -> Result<Image> {
    hide(plaintext, surrogate, params_prime)
}
