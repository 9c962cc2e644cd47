//! Dataset discovery, decoding and the seeded train/test split.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use fesf_core::Image;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult, IoContext};
use crate::imageio;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelSource {
    /// Every subdirectory of the root is a class.
    Directories,
    /// A CSV file of `path,label` lines, paths relative to the root.
    Table(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatio {
    pub train: f64,
    pub test: f64,
}

impl SplitRatio {
    pub fn new(train: f64, test: f64) -> AppResult<Self> {
        if !(train > 0.0 && test > 0.0 && train.is_finite() && test.is_finite()) {
            return Err(AppError::Validation(format!(
                "split ratio components must be positive, got {train}:{test}"
            )));
        }
        Ok(Self { train, test })
    }

    pub fn train_fraction(&self) -> f64 {
        self.train / (self.train + self.test)
    }
}

impl Default for SplitRatio {
    fn default() -> Self {
        Self { train: 6.0, test: 4.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Hashes `(seed, id)` to a point in `[0, 1)` and compares it with the train
/// fraction, so an image's split never depends on which other images exist.
pub fn assign_split(id: &str, seed: u64, ratio: SplitRatio) -> Split {
    let digest = Sha256::new()
        .chain_update(seed.to_le_bytes())
        .chain_update(id.as_bytes())
        .finalize();
    let head = u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"));
    let u = (head >> 11) as f64 / (1u64 << 53) as f64;
    if u < ratio.train_fraction() {
        Split::Train
    } else {
        Split::Test
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub root: PathBuf,
    pub labels: LabelSource,
    /// `(height, width)` every image is resized to.
    pub target: (usize, usize),
    pub channels: usize,
    pub split: SplitRatio,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            labels: LabelSource::Directories,
            target: (512, 512),
            channels: 3,
            split: SplitRatio::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sample {
    /// Path relative to the root with `/` separators and no extension.
    pub id: String,
    pub path: PathBuf,
    pub label: usize,
    pub split: Split,
    pub image: Image,
}

#[derive(Debug, Clone)]
pub struct Skipped {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub classes: Vec<String>,
    /// Sorted by id.
    pub samples: Vec<Sample>,
    pub skipped: Vec<Skipped>,
}

impl Dataset {
    pub fn count(&self, split: Split) -> usize {
        self.samples.iter().filter(|s| s.split == split).count()
    }
}

fn sample_id(root: &Path, path: &Path) -> AppResult<String> {
    let rel = path.strip_prefix(root).map_err(|_| {
        AppError::Validation(format!("{} is outside the dataset root", path.display()))
    })?;
    let rel = rel.with_extension("");
    let parts: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
    Ok(parts.join("/"))
}

fn sorted_entries(dir: &Path) -> AppResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).at(dir)? {
        let path = entry.at(dir)?.path();
        let hidden = path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with('.'));
        if !hidden {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// `(path, class name)` for every candidate image.
fn discover(spec: &DatasetSpec) -> AppResult<Vec<(PathBuf, String)>> {
    if !spec.root.is_dir() {
        return Err(AppError::Validation(format!("dataset root {} is not a directory", spec.root.display())));
    }
    match &spec.labels {
        LabelSource::Directories => {
            let mut found = Vec::new();
            for class_dir in sorted_entries(&spec.root)?.into_iter().filter(|p| p.is_dir()) {
                let class = class_dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
                let files: Vec<PathBuf> = sorted_entries(&class_dir)?
                    .into_iter()
                    .filter(|p| p.is_file() && imageio::has_image_extension(p))
                    .collect();
                if files.is_empty() {
                    return Err(AppError::Validation(format!("class '{class}' has no images")));
                }
                found.extend(files.into_iter().map(|f| (f, class.clone())));
            }
            Ok(found)
        }
        LabelSource::Table(table) => {
            let table_path = if table.is_absolute() { table.clone() } else { spec.root.join(table) };
            let text = fs::read_to_string(&table_path).at(&table_path)?;
            let mut labels: BTreeMap<PathBuf, String> = BTreeMap::new();
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') || (lineno == 0 && line == "path,label") {
                    continue;
                }
                let (path, label) = line.split_once(',').ok_or_else(|| {
                    AppError::Validation(format!("{}:{}: expected `path,label`", table_path.display(), lineno + 1))
                })?;
                let (path, label) = (spec.root.join(path.trim()), label.trim().to_string());
                if label.is_empty() {
                    return Err(AppError::Validation(format!("{}:{}: empty label", table_path.display(), lineno + 1)));
                }
                if let Some(previous) = labels.insert(path.clone(), label.clone()) {
                    if previous != label {
                        return Err(AppError::Validation(format!(
                            "{} is labelled both '{previous}' and '{label}'",
                            path.display()
                        )));
                    }
                }
            }
            Ok(labels.into_iter().collect())
        }
    }
}

/// Decodes and resizes every image, assigns labels and splits.
///
/// Unreadable files are skipped and listed in [`Dataset::skipped`]; a class
/// left with fewer than two images is an error.
pub fn ingest(spec: &DatasetSpec) -> AppResult<Dataset> {
    if spec.target.0 == 0 || spec.target.1 == 0 {
        return Err(AppError::Validation("resize target must be nonzero".into()));
    }
    let candidates = discover(spec)?;
    let classes: Vec<String> = {
        let mut c: Vec<String> = candidates.iter().map(|(_, c)| c.clone()).collect();
        c.sort();
        c.dedup();
        c
    };
    let decoded: Vec<(PathBuf, String, AppResult<Image>)> = candidates
        .into_par_iter()
        .map(|(path, class)| {
            let img = imageio::load(&path, spec.channels, Some(spec.target));
            (path, class, img)
        })
        .collect();

    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for (path, class, result) in decoded {
        match result {
            Ok(image) => {
                let id = sample_id(&spec.root, &path)?;
                samples.push(Sample {
                    split: assign_split(&id, spec.seed, spec.split),
                    label: classes.binary_search(&class).expect("class was collected"),
                    id,
                    path,
                    image,
                });
            }
            Err(AppError::Io { source, .. }) if source.kind() != std::io::ErrorKind::NotFound => {
                log::warn!("skipping {}: {source}", path.display());
                skipped.push(Skipped { path, reason: source.to_string() });
            }
            Err(AppError::Decode { message, .. }) => {
                log::warn!("skipping {}: {message}", path.display());
                skipped.push(Skipped { path, reason: message });
            }
            Err(e) => return Err(e),
        }
    }
    samples.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = samples.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(AppError::Validation(format!("two files share the id '{}'", w[0].id)));
    }
    for (k, class) in classes.iter().enumerate() {
        let n = samples.iter().filter(|s| s.label == k).count();
        if n == 0 {
            return Err(AppError::Validation(format!("class '{class}' has no readable images")));
        }
        if n < 2 {
            return Err(AppError::Validation(format!("class '{class}' needs at least 2 images, has {n}")));
        }
    }
    if classes.is_empty() {
        return Err(AppError::Validation(format!("no images found under {}", spec.root.display())));
    }
    Ok(Dataset {
        spec: spec.clone(),
        classes,
        samples,
        skipped,
    })
}
