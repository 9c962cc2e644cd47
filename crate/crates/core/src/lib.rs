//! Frequency-domain image concealment.
//!
//! A plaintext image is hidden inside a host image by exchanging the
//! low-frequency part of their amplitude spectra while keeping the host
//! phase. The result can be pulled toward the host domain by a small
//! adversarially trained generator and then refined with a second,
//! low-intensity exchange. Quality and privacy are measured with SSIM and
//! PSNR.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, dataset
//! handling and the command line live in the `fesf` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod classifier;
pub mod error;
pub mod fft;
pub mod ihm;
pub mod image;
pub mod iqem;
pub mod metrics;
pub mod nn;
pub mod spectral;
pub mod toy;

pub use error::{Error, Result};
pub use ihm::{build_mask, hide, refine, FrequencyMask, HidingParams};
pub use image::{Image, Shape};
pub use iqem::{enhance, gan_losses, train_enhancer, EnhancerModel, TrainConfig};
pub use metrics::{psnr, ssim, PairKind, QualityReport};
pub use spectral::{decompose, fft2, ifft2, recompose, AmplitudePhase, Spectrum};
