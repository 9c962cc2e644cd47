//! End-to-end run on procedurally generated data.
//!
//! The bundled dataset has one class per low-frequency bin: every image is a
//! grey field with random mid-frequency waves, plus a cosine at its class's
//! bin (see [`fesf_core::toy::signal_sample`]). The host is
//! [`fesf_core::toy::host_texture`]. Both are written as PNGs under
//! `inputs/` and then read back through the normal ingest path.

use std::fs;
use std::path::{Path, PathBuf};

use fesf_core::{toy, HidingParams, Shape};
use rayon::prelude::*;

use crate::config::Config;
use crate::error::{AppResult, IoContext};
use crate::imageio;
use crate::manifest::Manifest;
use crate::pipeline::{self, Evaluation, Population, Source, UtilityResult, MANIFEST_FILE};

#[derive(Debug, Clone)]
pub struct DemoOptions {
    pub output: PathBuf,
    pub seed: u64,
    pub classes: usize,
    pub per_class: usize,
    /// Side of the square demo images.
    pub size: usize,
    pub enhancer_epochs: usize,
    pub params: HidingParams,
    pub params_prime: HidingParams,
}

impl DemoOptions {
    pub fn new(output: impl Into<PathBuf>) -> Self {
        Self {
            output: output.into(),
            seed: 0,
            classes: 2,
            per_class: 150,
            size: 64,
            enhancer_epochs: 10,
            params: HidingParams::HIDE_DEFAULT,
            params_prime: HidingParams::REFINE_DEFAULT,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DemoSummary {
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
    pub evaluation: Evaluation,
    /// Plaintext, surrogate, refined, then the shuffled-label surrogate control.
    pub utility: Vec<UtilityResult>,
}

pub const CLASSES_DIR: &str = "inputs/demo";
pub const HOST_SOURCE: &str = "inputs/host.png";

/// Writes the procedural dataset and host under `dir`.
pub fn write_inputs(dir: &Path, opts: &DemoOptions) -> AppResult<()> {
    let shape = Shape::new(3, opts.size, opts.size);
    let classes = dir.join(CLASSES_DIR);
    if classes.exists() {
        fs::remove_dir_all(&classes).at(&classes)?;
    }
    let jobs: Vec<(usize, usize)> = (0..opts.classes)
        .flat_map(|c| (0..opts.per_class).map(move |i| (c, i)))
        .collect();
    jobs.par_iter().try_for_each(|&(c, i)| -> AppResult<()> {
        let index = (c * opts.per_class + i) as u64;
        let img = toy::signal_sample(shape, c, opts.seed, index)?;
        imageio::save_png(&classes.join(class_name(c)).join(format!("{i:04}.png")), &img)
    })?;
    imageio::save_png(&dir.join(HOST_SOURCE), &toy::host_texture(shape)?)
}

pub fn class_name(class: usize) -> String {
    let (m, n) = toy::class_frequency(class);
    format!("class{class}_bin{m}{n}")
}

pub fn demo_config(opts: &DemoOptions) -> Config {
    let mut config = Config::default();
    config.seed = opts.seed;
    config.dataset.root = Some(opts.output.join(CLASSES_DIR));
    config.dataset.target = [opts.size, opts.size];
    config.host.path = Some(opts.output.join(HOST_SOURCE));
    config.hiding.alpha = opts.params.alpha();
    config.hiding.beta = opts.params.beta();
    config.hiding.alpha_prime = opts.params_prime.alpha();
    config.hiding.beta_prime = opts.params_prime.beta();
    config.enhancer.epochs = opts.enhancer_epochs;
    config.output.root = opts.output.clone();
    config
}

/// Generates inputs, surrogates, the quality report and the utility report.
pub fn run(opts: &DemoOptions) -> AppResult<DemoSummary> {
    fs::create_dir_all(&opts.output).at(&opts.output)?;
    write_inputs(&opts.output, opts)?;
    let config = demo_config(opts);
    let (_, manifest) = pipeline::run_generate(&config, None)?;
    let manifest_path = opts.output.join(MANIFEST_FILE);

    let evaluation = pipeline::evaluate(&manifest_path, Population::All)?;
    pipeline::write_report(&opts.output, &evaluation)?;

    let classifier = config.classifier_config();
    let mut utility = Vec::new();
    for source in [Source::Plaintext, Source::Surrogate, Source::Refined] {
        utility.push(pipeline::utility(&manifest_path, source, &classifier, false)?);
    }
    utility.push(pipeline::utility(&manifest_path, Source::Surrogate, &classifier, true)?);
    let json = serde_json::to_string_pretty(&utility).expect("utility serializes") + "\n";
    let path = opts.output.join("utility.json");
    fs::write(&path, json).at(&path)?;
    let path = opts.output.join("utility.txt");
    fs::write(&path, pipeline::render_utility(&utility)).at(&path)?;

    Ok(DemoSummary {
        manifest_path,
        manifest,
        evaluation,
        utility,
    })
}
