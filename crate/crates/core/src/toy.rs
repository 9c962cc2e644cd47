//! Procedural images for demos and tests.
//!
//! Everything here is a pure function of its arguments, so generated data is
//! identical on every platform and run.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::image::{Image, Shape};

/// Smooth multi-scale texture: a few oriented waves, a soft disc and a
/// diagonal ridge, tinted per channel.
pub fn host_texture(shape: Shape) -> Result<Image> {
    let (hh, ww) = (shape.height as f64, shape.width as f64);
    Image::from_fn(shape, |c, h, w| {
        let (y, x) = (h as f64 / hh, w as f64 / ww);
        let c = c as f64;
        let waves = 0.14 * libm::sin(TAU * (3.0 * x + 0.7 * c)) * libm::cos(TAU * 2.5 * y)
            + 0.07 * libm::sin(TAU * (8.0 * (x + y) + 0.3 * c));
        let (dy, dx) = (y - 0.4, x - 0.6);
        let disc = 0.18 * libm::exp(-(dx * dx + dy * dy) / 0.02);
        let ridge = 0.08 * libm::exp(-libm::pow(x - y - 0.1, 2.0) / 0.004);
        (0.45 + 0.05 * c + waves + disc - ridge).clamp(0.0, 1.0)
    })
}

/// The color-cast domain pair used to exercise the enhancer.
///
/// Synthetic images are crops of [`ColorCastTask::host`] shifted by a fixed
/// per-channel offset; `held_out` pairs each untouched host crop with its
/// shifted version, taken at positions independent of the training crops.
#[derive(Debug, Clone)]
pub struct ColorCastTask {
    pub host: Image,
    pub train: Vec<Image>,
    pub held_out: Vec<(Image, Image)>,
}

pub const COLOR_CAST: [f64; 3] = [0.12, -0.06, 0.09];

/// A 3×96×96 host, `n_train` training synthetics and `n_held_out` evaluation
/// pairs, all of side `patch` (at most 96).
pub fn color_cast_task(seed: u64, patch: usize, n_train: usize, n_held_out: usize) -> Result<ColorCastTask> {
    let host = Image::from_fn(Shape::new(3, 96, 96), |c, h, w| {
        let (y, x) = (h as f64 / 48.0, w as f64 / 48.0);
        let base = 0.5
            + 0.2 * libm::sin(6.0 * x + 2.0 * c as f64) * libm::cos(5.0 * y)
            + 0.1 * libm::sin(17.0 * (x + y));
        base.clamp(0.0, 1.0)
    })?;
    let span = 96 - patch.min(96);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pair = || -> Result<(Image, Image)> {
        let (top, left) = (rng.random_range(0..=span), rng.random_range(0..=span));
        let clean = host.crop(top, left, patch, patch)?;
        let cast = Image::from_fn(clean.shape(), |c, h, w| (clean.get(c, h, w) + COLOR_CAST[c]).clamp(0.0, 1.0))?;
        Ok((clean, cast))
    };
    let train = (0..n_train).map(|_| pair().map(|p| p.1)).collect::<Result<Vec<_>>>()?;
    let held_out = (0..n_held_out).map(|_| pair()).collect::<Result<Vec<_>>>()?;
    Ok(ColorCastTask { host, train, held_out })
}

/// Low-frequency bin `(m, n)` carrying the signal of class `k`.
pub fn class_frequency(class: usize) -> (usize, usize) {
    const BINS: [(usize, usize); 6] = [(1, 0), (0, 1), (1, 1), (2, 0), (0, 2), (2, 1)];
    BINS[class % BINS.len()]
}

/// Amplitude of the class wave relative to the unit pixel range.
pub const CLASS_SIGNAL: f64 = 0.15;

/// One labelled sample whose class lives in a single low-frequency amplitude.
///
/// The image is a mid-grey field with six random mid-frequency waves (the
/// nuisance), plus a cosine at [`class_frequency`]`(class)` of amplitude
/// [`CLASS_SIGNAL`]. The seed stream is `(seed, index)`, so each sample is
/// independent of how many others are drawn.
pub fn signal_sample(shape: Shape, class: usize, seed: u64, index: u64) -> Result<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ index);
    let waves: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.random_range(2.0..9.0),
                rng.random_range(2.0..9.0),
                rng.random_range(0.0..TAU),
                rng.random_range(0.02..0.06),
            )
        })
        .collect();
    let tint: Vec<f64> = (0..shape.channels).map(|_| rng.random_range(-0.05..0.05)).collect();
    let (fm, fn_) = class_frequency(class);
    let (hh, ww) = (shape.height as f64, shape.width as f64);
    Image::from_fn(shape, |c, h, w| {
        let (y, x) = (h as f64 / hh, w as f64 / ww);
        let nuisance: f64 = waves
            .iter()
            .map(|&(fy, fx, ph, a)| a * libm::sin(TAU * (fy * y + fx * x) + ph))
            .sum();
        let signal = CLASS_SIGNAL * libm::cos(TAU * (fm as f64 * y + fn_ as f64 * x));
        (0.5 + tint[c] + nuisance + signal).clamp(0.0, 1.0)
    })
}
