//! Line-delimited JSON manifest: one header record, then one record per plaintext.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::Split;
use crate::error::{AppError, AppResult, IoContext};

pub const SCHEMA_VERSION: u32 = 1;
pub const PIPELINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsRecord {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_prime: f64,
    pub beta_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnhancerRecord {
    /// `"trained-per-run"`, `"supplied"` or `"none"`.
    pub mode: String,
    /// Model file relative to the manifest directory.
    pub model: Option<String>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub training_images: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema_version: u32,
    pub pipeline_version: String,
    pub seed: u64,
    pub dataset_name: String,
    /// Dataset root, relative to the manifest directory when it lies inside it.
    pub dataset_root: String,
    /// `[channels, height, width]` of every artifact.
    pub shape: [usize; 3],
    pub split_ratio: [f64; 2],
    pub classes: Vec<String>,
    pub host_id: String,
    /// Resized host, relative to the manifest directory.
    pub host_artifact: String,
    pub params: ParamsRecord,
    pub enhancer: EnhancerRecord,
    pub entry_count: usize,
    pub skipped_inputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub plaintext_id: String,
    /// Source file relative to the dataset root.
    pub plaintext_path: String,
    pub host_id: String,
    pub synthetic: Option<String>,
    pub surrogate: Option<String>,
    pub refined: Option<String>,
    pub alpha: f64,
    pub beta: f64,
    pub alpha_prime: f64,
    pub beta_prime: f64,
    pub label: usize,
    pub class: String,
    pub split: Split,
    /// Set when generating this entry failed; its artifact paths are then absent.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Record {
    Header(Header),
    Entry(Entry),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: Header,
    pub entries: Vec<Entry>,
}

/// Renders `path` relative to `base` with `/` separators when it lies under
/// `base`, otherwise as an absolute path.
pub fn relative_to(path: &Path, base: &Path) -> String {
    let abs = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    match abs(path).strip_prefix(abs(base)) {
        Ok(rel) => {
            let parts: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
            if parts.is_empty() {
                ".".into()
            } else {
                parts.join("/")
            }
        }
        Err(_) => abs(path).to_string_lossy().into_owned(),
    }
}

impl Manifest {
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&Record::Header(self.header.clone())).expect("header serializes");
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(&Record::Entry(e.clone())).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> AppResult<Self> {
        let mut header = None;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let record: Record = serde_json::from_str(line)
                .map_err(|e| AppError::Validation(format!("manifest line {}: {e}", i + 1)))?;
            match record {
                Record::Header(h) if header.is_none() && i == 0 => header = Some(h),
                Record::Header(_) => {
                    return Err(AppError::Validation(format!("manifest line {}: unexpected header", i + 1)))
                }
                Record::Entry(e) => entries.push(e),
            }
        }
        let header = header.ok_or_else(|| AppError::Validation("manifest has no header record".into()))?;
        if header.schema_version != SCHEMA_VERSION {
            return Err(AppError::Validation(format!(
                "manifest schema {} is not supported (expected {SCHEMA_VERSION})",
                header.schema_version
            )));
        }
        if header.entry_count != entries.len() {
            return Err(AppError::Validation(format!(
                "manifest header announces {} entries, found {}",
                header.entry_count,
                entries.len()
            )));
        }
        Ok(Self { header, entries })
    }

    pub fn write(&self, path: &Path) -> AppResult<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).at(parent)?;
        }
        let mut f = fs::File::create(path).at(path)?;
        f.write_all(self.to_jsonl().as_bytes()).at(path)
    }

    pub fn read(path: &Path) -> AppResult<Self> {
        Self::from_jsonl(&fs::read_to_string(path).at(path)?)
    }

    /// Every artifact path, relative to the manifest directory.
    pub fn artifacts(&self) -> Vec<&str> {
        let mut out = vec![self.header.host_artifact.as_str()];
        out.extend(self.header.enhancer.model.as_deref());
        for e in &self.entries {
            out.extend([&e.synthetic, &e.surrogate, &e.refined].into_iter().filter_map(|p| p.as_deref()));
        }
        out
    }

    pub fn dataset_root(&self, manifest_dir: &Path) -> PathBuf {
        let root = Path::new(&self.header.dataset_root);
        if root.is_absolute() {
            root.to_path_buf()
        } else {
            manifest_dir.join(root)
        }
    }
}
