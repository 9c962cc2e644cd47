//! TOML run configuration. Every field has a default, so an empty file is valid.

use std::fs;
use std::path::{Path, PathBuf};

use fesf_core::classifier::ClassifierConfig;
use fesf_core::{HidingParams, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetSpec, LabelSource, SplitRatio};
use crate::error::{AppError, AppResult};

/// Overrides `output.root` when set.
pub const OUTPUT_ROOT_ENV: &str = "FESF_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub dataset: DatasetSection,
    pub host: HostSection,
    pub hiding: HidingSection,
    pub enhancer: EnhancerSection,
    pub classifier: ClassifierSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub root: Option<PathBuf>,
    /// CSV of `path,label`; class subdirectories are used when absent.
    pub label_table: Option<PathBuf>,
    /// `[height, width]`.
    pub target: [usize; 2],
    pub channels: usize,
    /// `[train, test]`.
    pub split: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HostSection {
    /// Host image file; a procedural texture is used when absent.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HidingSection {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_prime: f64,
    pub beta_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnhancerSection {
    /// Train an enhancer during `generate` unless a model file is given.
    pub enabled: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub content_weight: f64,
    pub patch_size: usize,
    pub features: usize,
    pub grad_clip: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub downsample: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub root: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            dataset: DatasetSection::default(),
            host: HostSection::default(),
            hiding: HidingSection::default(),
            enhancer: EnhancerSection::default(),
            classifier: ClassifierSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            root: None,
            label_table: None,
            target: [512, 512],
            channels: 3,
            split: [6.0, 4.0],
        }
    }
}

impl Default for HidingSection {
    fn default() -> Self {
        let (h, r) = (HidingParams::HIDE_DEFAULT, HidingParams::REFINE_DEFAULT);
        Self {
            alpha: h.alpha(),
            beta: h.beta(),
            alpha_prime: r.alpha(),
            beta_prime: r.beta(),
        }
    }
}

impl Default for EnhancerSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            enabled: true,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            content_weight: t.content_weight,
            patch_size: t.patch_size,
            features: t.features,
            grad_clip: t.grad_clip,
        }
    }
}

impl Default for ClassifierSection {
    fn default() -> Self {
        let c = ClassifierConfig::default();
        Self {
            epochs: c.epochs,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            weight_decay: c.weight_decay,
            downsample: c.downsample,
        }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            root: PathBuf::from("fesf-out"),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> AppResult<Self> {
        toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            AppError::Config(m) => AppError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Applies the output-root environment override.
    pub fn apply_env(&mut self) {
        if let Some(root) = std::env::var_os(OUTPUT_ROOT_ENV).filter(|v| !v.is_empty()) {
            self.output.root = PathBuf::from(root);
        }
    }

    pub fn hide_params(&self) -> AppResult<HidingParams> {
        Ok(HidingParams::new(self.hiding.alpha, self.hiding.beta)?)
    }

    pub fn refine_params(&self) -> AppResult<HidingParams> {
        HidingParams::new(self.hiding.alpha_prime, self.hiding.beta_prime).map_err(|e| match e {
            fesf_core::Error::OutOfRange { name, value, min, max } => fesf_core::Error::OutOfRange {
                name: if name == "alpha" { "alpha_prime" } else { "beta_prime" },
                value,
                min,
                max,
            }
            .into(),
            other => other.into(),
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        let e = &self.enhancer;
        TrainConfig {
            epochs: e.epochs,
            batch_size: e.batch_size,
            learning_rate: e.learning_rate,
            content_weight: e.content_weight,
            seed: self.seed,
            patch_size: e.patch_size,
            features: e.features,
            grad_clip: e.grad_clip,
        }
    }

    pub fn classifier_config(&self) -> ClassifierConfig {
        let c = &self.classifier;
        ClassifierConfig {
            epochs: c.epochs,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            weight_decay: c.weight_decay,
            seed: self.seed,
            downsample: c.downsample,
        }
    }

    pub fn dataset_spec(&self) -> AppResult<DatasetSpec> {
        let root = self
            .dataset
            .root
            .clone()
            .ok_or_else(|| AppError::Config("dataset.root is not set".into()))?;
        let [h, w] = self.dataset.target;
        Ok(DatasetSpec {
            root,
            labels: match &self.dataset.label_table {
                Some(t) => LabelSource::Table(t.clone()),
                None => LabelSource::Directories,
            },
            target: (h, w),
            channels: self.dataset.channels,
            split: SplitRatio::new(self.dataset.split[0], self.dataset.split[1])?,
            seed: self.seed,
        })
    }
}
