//! Dataset pipeline, file formats and command line around [`fesf_core`].
//!
//! `generate` hides every plaintext of a dataset in one host image, runs the
//! enhancer and the refinement pass, and records all artifacts in a
//! line-delimited manifest; `evaluate` and `utility` read that manifest back.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod demo;
pub mod error;
pub mod imageio;
pub mod manifest;
pub mod model_file;
pub mod pipeline;

pub use error::{AppError, AppResult};
pub use fesf_core;
