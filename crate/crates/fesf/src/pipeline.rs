//! Batch surrogate generation, quality evaluation and the utility check.

use std::fs;
use std::path::{Path, PathBuf};

use fesf_core::classifier::{classification_scores, ClassificationScores, Classifier, ClassifierConfig};
use fesf_core::iqem::{enhance, train_enhancer, EnhancerModel};
use fesf_core::metrics::{score_entry, EntryScores, QualityReport};
use fesf_core::{hide, refine, toy, HidingParams, Image, Shape, TrainConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::dataset::{self, Dataset, Split};
use crate::error::{AppError, AppResult, IoContext};
use crate::imageio;
use crate::manifest::{self, EnhancerRecord, Entry, Header, Manifest, ParamsRecord};
use crate::model_file;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const HOST_ARTIFACT: &str = "host.png";
pub const MODEL_FILE: &str = "enhancer.fesf";
pub const ARTIFACT_DIRS: [&str; 3] = ["synthetic", "surrogate", "refined"];

/// Where the surrogate generator comes from.
pub enum EnhancerChoice<'a> {
    /// Surrogates are the synthetic images themselves.
    None,
    Supplied { model: &'a EnhancerModel, path: &'a Path },
    /// Train on the train-split synthetics of this run.
    Train(TrainConfig),
}

pub struct GenerateOptions<'a> {
    pub output_dir: &'a Path,
    pub params: HidingParams,
    pub params_prime: HidingParams,
    pub seed: u64,
    pub host_id: String,
}

/// Loads the host from `path`, or renders the procedural texture, at the dataset shape.
pub fn load_host(path: Option<&Path>, shape: Shape) -> AppResult<(Image, String)> {
    match path {
        Some(p) => {
            let id = p.file_stem().map_or_else(|| "host".into(), |s| s.to_string_lossy().into_owned());
            Ok((imageio::load(p, shape.channels, Some((shape.height, shape.width)))?, id))
        }
        None => Ok((toy::host_texture(shape)?, "procedural-texture".into())),
    }
}

fn artifact_rel(kind: &str, id: &str) -> String {
    format!("{kind}/{id}.png")
}

/// Hides every plaintext in `host`, enhances and refines, writes all
/// artifacts under `output_dir` and returns the manifest written there.
pub fn generate(
    dataset: &Dataset,
    host: &Image,
    enhancer: EnhancerChoice<'_>,
    opts: &GenerateOptions<'_>,
) -> AppResult<Manifest> {
    let spec = &dataset.spec;
    let shape = Shape::new(spec.channels, spec.target.0, spec.target.1);
    if host.shape() != shape {
        return Err(AppError::Validation(format!("host is {}, dataset images are {shape}", host.shape())));
    }
    let out = opts.output_dir;
    fs::create_dir_all(out).at(out)?;
    for dir in ARTIFACT_DIRS {
        let d = out.join(dir);
        if d.exists() {
            fs::remove_dir_all(&d).at(&d)?;
        }
    }
    imageio::save_png(&out.join(HOST_ARTIFACT), host)?;

    let synthetics: Vec<Result<Image, String>> = dataset
        .samples
        .par_iter()
        .map(|s| hide(&s.image, host, opts.params).map_err(|e| e.to_string()))
        .collect();

    let trained;
    let (model, record) = match enhancer {
        EnhancerChoice::None => (
            None,
            EnhancerRecord {
                mode: "none".into(),
                model: None,
                seed: None,
                epochs: None,
                training_images: None,
            },
        ),
        EnhancerChoice::Supplied { model, path } => (
            Some(model),
            EnhancerRecord {
                mode: "supplied".into(),
                model: Some(manifest::relative_to(path, out)),
                seed: Some(model.meta.seed),
                epochs: Some(model.meta.epochs),
                training_images: None,
            },
        ),
        EnhancerChoice::Train(config) => {
            let train_set: Vec<Image> = dataset
                .samples
                .iter()
                .zip(&synthetics)
                .filter(|(s, _)| s.split == Split::Train)
                .filter_map(|(_, r)| r.as_ref().ok().cloned())
                .collect();
            log::info!("training enhancer on {} synthetic images", train_set.len());
            trained = train_enhancer(&train_set, host, &config)?;
            model_file::save(&out.join(MODEL_FILE), &trained)?;
            (
                Some(&trained),
                EnhancerRecord {
                    mode: "trained-per-run".into(),
                    model: Some(MODEL_FILE.into()),
                    seed: Some(config.seed),
                    epochs: Some(config.epochs),
                    training_images: Some(train_set.len()),
                },
            )
        }
    };

    let results: Vec<AppResult<()>> = dataset
        .samples
        .par_iter()
        .zip(synthetics)
        .map(|(s, synthetic)| {
            let synthetic = synthetic.map_err(AppError::Failed)?;
            let surrogate = match model {
                Some(m) => enhance(m, &synthetic)?,
                None => synthetic.clone(),
            };
            let refined = refine(&surrogate, &s.image, opts.params_prime)?;
            for (kind, img) in ARTIFACT_DIRS.iter().zip([&synthetic, &surrogate, &refined]) {
                imageio::save_png(&out.join(artifact_rel(kind, &s.id)), img)?;
            }
            Ok(())
        })
        .collect();

    let (p, pp) = (opts.params, opts.params_prime);
    let mut entries = Vec::with_capacity(results.len());
    for (s, r) in dataset.samples.iter().zip(&results) {
        let (paths, error) = match r {
            Ok(_) => (ARTIFACT_DIRS.map(|k| Some(artifact_rel(k, &s.id))), None),
            Err(e) => {
                log::warn!("entry {} failed: {e}", s.id);
                ([None, None, None], Some(e.to_string()))
            }
        };
        let [synthetic, surrogate, refined] = paths;
        entries.push(Entry {
            plaintext_id: s.id.clone(),
            plaintext_path: manifest::relative_to(&s.path, &spec.root),
            host_id: opts.host_id.clone(),
            synthetic,
            surrogate,
            refined,
            alpha: p.alpha(),
            beta: p.beta(),
            alpha_prime: pp.alpha(),
            beta_prime: pp.beta(),
            label: s.label,
            class: dataset.classes[s.label].clone(),
            split: s.split,
            error,
        });
    }
    if !entries.is_empty() && entries.iter().all(|e| e.error.is_some()) {
        return Err(AppError::Failed(format!(
            "every entry failed; first error: {}",
            entries[0].error.as_deref().unwrap_or_default()
        )));
    }
    let manifest = Manifest {
        header: Header {
            schema_version: manifest::SCHEMA_VERSION,
            pipeline_version: manifest::PIPELINE_VERSION.into(),
            seed: opts.seed,
            dataset_name: spec
                .root
                .file_name()
                .map_or_else(|| "dataset".into(), |n| n.to_string_lossy().into_owned()),
            dataset_root: manifest::relative_to(&spec.root, out),
            shape: [shape.channels, shape.height, shape.width],
            split_ratio: [spec.split.train, spec.split.test],
            classes: dataset.classes.clone(),
            host_id: opts.host_id.clone(),
            host_artifact: HOST_ARTIFACT.into(),
            params: ParamsRecord {
                alpha: p.alpha(),
                beta: p.beta(),
                alpha_prime: pp.alpha(),
                beta_prime: pp.beta(),
            },
            enhancer: record,
            entry_count: entries.len(),
            skipped_inputs: dataset
                .skipped
                .iter()
                .map(|s| manifest::relative_to(&s.path, &spec.root))
                .collect(),
        },
        entries,
    };
    manifest.write(&out.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Ingests the configured dataset, prepares the host and enhancer, and runs [`generate`].
pub fn run_generate(config: &Config, model_path: Option<&Path>) -> AppResult<(Dataset, Manifest)> {
    let spec = config.dataset_spec()?;
    let (params, params_prime) = (config.hide_params()?, config.refine_params()?);
    let dataset = dataset::ingest(&spec)?;
    if !dataset.skipped.is_empty() {
        log::warn!("{} unreadable input file(s) skipped", dataset.skipped.len());
    }
    let shape = Shape::new(spec.channels, spec.target.0, spec.target.1);
    let (host, host_id) = load_host(config.host.path.as_deref(), shape)?;
    let supplied;
    let choice = match model_path {
        Some(path) => {
            supplied = model_file::load(path)?;
            EnhancerChoice::Supplied { model: &supplied, path }
        }
        None if config.enhancer.enabled => EnhancerChoice::Train(config.train_config()),
        None => EnhancerChoice::None,
    };
    let opts = GenerateOptions {
        output_dir: &config.output.root,
        params,
        params_prime,
        seed: config.seed,
        host_id,
    };
    let manifest = generate(&dataset, &host, choice, &opts)?;
    Ok((dataset, manifest))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Population {
    All,
    Train,
    Test,
}

impl Population {
    fn admits(&self, split: Split) -> bool {
        match self {
            Population::All => true,
            Population::Train => split == Split::Train,
            Population::Test => split == Split::Test,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Population::All => "all entries",
            Population::Train => "train split",
            Population::Test => "test split",
        }
    }
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn load_artifact(dir: &Path, rel: Option<&str>, shape: Shape) -> AppResult<Image> {
    let rel = rel.ok_or_else(|| AppError::Validation("artifact missing from manifest entry".into()))?;
    let img = imageio::load(&dir.join(rel), shape.channels, None)?;
    if img.shape() != shape {
        return Err(AppError::Validation(format!("{rel} is {}, expected {shape}", img.shape())));
    }
    Ok(img)
}

fn header_shape(m: &Manifest) -> Shape {
    let [c, h, w] = m.header.shape;
    Shape::new(c, h, w)
}

fn load_plaintext(m: &Manifest, dir: &Path, e: &Entry) -> AppResult<Image> {
    let shape = header_shape(m);
    imageio::load(&m.dataset_root(dir).join(&e.plaintext_path), shape.channels, Some((shape.height, shape.width)))
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: QualityReport,
    /// `(plaintext id, error)` for entries left out of the means.
    pub entry_errors: Vec<(String, String)>,
}

/// SSIM and PSNR for the four pair kinds over the chosen population.
pub fn evaluate(manifest_path: &Path, population: Population) -> AppResult<Evaluation> {
    let m = Manifest::read(manifest_path)?;
    let dir = manifest_dir(manifest_path);
    let shape = header_shape(&m);
    let host = load_artifact(&dir, Some(&m.header.host_artifact), shape)?;
    let selected: Vec<&Entry> = m.entries.iter().filter(|e| population.admits(e.split)).collect();
    if selected.is_empty() {
        return Err(AppError::Validation(format!("manifest has no entries in the {}", population.label())));
    }
    let scored: Vec<AppResult<EntryScores>> = selected
        .par_iter()
        .map(|e| {
            if let Some(err) = &e.error {
                return Err(AppError::Failed(format!("generation failed: {err}")));
            }
            let plaintext = load_plaintext(&m, &dir, e)?;
            let synthetic = load_artifact(&dir, e.synthetic.as_deref(), shape)?;
            let refined = load_artifact(&dir, e.refined.as_deref(), shape)?;
            Ok(score_entry(&host, &plaintext, &synthetic, &refined, None)?)
        })
        .collect();
    let mut scores = Vec::new();
    let mut entry_errors = Vec::new();
    for (e, r) in selected.iter().zip(scored) {
        match r {
            Ok(s) => scores.push(s),
            Err(err) => entry_errors.push((e.plaintext_id.clone(), err.to_string())),
        }
    }
    let report = QualityReport::from_entries(&m.header.dataset_name, population.label(), &scores, entry_errors.len())?;
    Ok(Evaluation { report, entry_errors })
}

#[derive(Serialize)]
struct RowRecord<'a> {
    dataset: &'a str,
    population: &'a str,
    pair_kind: &'a str,
    metric: &'a str,
    mean: f64,
    count: usize,
}

/// Writes `report.txt` (tables) and `report.jsonl` (one row per pair kind and metric).
pub fn write_report(dir: &Path, eval: &Evaluation) -> AppResult<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).at(dir)?;
    let mut text = eval.report.render_table();
    for (id, err) in &eval.entry_errors {
        text.push_str(&format!("error: {id}: {err}\n"));
    }
    let mut jsonl = String::new();
    for r in eval.report.rows() {
        let rec = RowRecord {
            dataset: &r.dataset,
            population: &r.population,
            pair_kind: r.pair_kind,
            metric: r.metric,
            mean: r.mean,
            count: r.count,
        };
        jsonl.push_str(&serde_json::to_string(&rec).expect("row serializes"));
        jsonl.push('\n');
    }
    let (txt_path, jsonl_path) = (dir.join("report.txt"), dir.join("report.jsonl"));
    fs::write(&txt_path, text).at(&txt_path)?;
    fs::write(&jsonl_path, jsonl).at(&jsonl_path)?;
    Ok((txt_path, jsonl_path))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Plaintext,
    Surrogate,
    Refined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl From<ClassificationScores> for Scores {
    fn from(s: ClassificationScores) -> Self {
        Self {
            accuracy: s.accuracy,
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityResult {
    pub classifier: String,
    pub trained_on: Source,
    pub shuffled_labels: bool,
    /// Classifiers averaged into the scores: 1 for true labels,
    /// [`SHUFFLE_PERMUTATIONS`] for the shuffled-label control.
    pub permutations: usize,
    pub num_classes: usize,
    pub chance: f64,
    pub train_count: usize,
    pub test_count: usize,
    pub train: Scores,
    pub test: Scores,
}

const SHUFFLE_STREAM: u64 = 0x5bd1_e995;

/// Label permutations averaged by the shuffled-label control. On
/// well-separated classes a single permutation is a poor null: the fitted
/// weights keep a random-signed component along the class axis, so one
/// shuffled classifier can score anywhere from far below to far above chance.
pub const SHUFFLE_PERMUTATIONS: usize = 64;

fn mean_scores(scores: &[Scores]) -> Scores {
    let n = scores.len() as f64;
    let avg = |f: fn(&Scores) -> f64| scores.iter().map(f).sum::<f64>() / n;
    Scores {
        accuracy: avg(|s| s.accuracy),
        precision: avg(|s| s.precision),
        recall: avg(|s| s.recall),
        f1: avg(|s| s.f1),
    }
}

/// Trains the linear classifier on the train split of `source` and scores it
/// on the test split of the same source. With `shuffle_labels` the scores
/// are the mean over [`SHUFFLE_PERMUTATIONS`] classifiers, each trained on a
/// random permutation of the training labels; that mean should sit near
/// chance.
pub fn utility(
    manifest_path: &Path,
    source: Source,
    config: &ClassifierConfig,
    shuffle_labels: bool,
) -> AppResult<UtilityResult> {
    let m = Manifest::read(manifest_path)?;
    let dir = manifest_dir(manifest_path);
    let shape = header_shape(&m);
    let usable: Vec<&Entry> = m.entries.iter().filter(|e| e.error.is_none()).collect();
    let images: Vec<Image> = usable
        .par_iter()
        .map(|e| match source {
            Source::Plaintext => load_plaintext(&m, &dir, e),
            Source::Surrogate => load_artifact(&dir, e.surrogate.as_deref(), shape),
            Source::Refined => load_artifact(&dir, e.refined.as_deref(), shape),
        })
        .collect::<AppResult<_>>()?;
    let pick = |split: Split| -> (Vec<Image>, Vec<usize>) {
        usable
            .iter()
            .zip(&images)
            .filter(|(e, _)| e.split == split)
            .map(|(e, img)| (img.clone(), e.label))
            .unzip()
    };
    let (train_x, train_y) = pick(Split::Train);
    let (test_x, test_y) = pick(Split::Test);
    let num_classes = m.header.classes.len();
    let distinct = |ys: &[usize]| (0..num_classes).filter(|k| ys.contains(k)).count();
    if num_classes < 2 || distinct(&train_y) < 2 {
        return Err(AppError::Validation("utility check needs at least two classes in the train split".into()));
    }
    if test_x.is_empty() {
        return Err(AppError::Validation("utility check needs a nonempty test split".into()));
    }
    let labelings: Vec<Vec<usize>> = if shuffle_labels {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM);
        (0..SHUFFLE_PERMUTATIONS)
            .map(|_| {
                let mut y = train_y.clone();
                y.shuffle(&mut rng);
                y
            })
            .collect()
    } else {
        vec![train_y]
    };
    let scored: Vec<(Scores, Scores)> = labelings
        .par_iter()
        .map(|ys| -> AppResult<(Scores, Scores)> {
            let clf = Classifier::train(&train_x, ys, config)?;
            let predict = |xs: &[Image]| xs.iter().map(|x| clf.predict(x)).collect::<Result<Vec<_>, _>>();
            let train = classification_scores(&predict(&train_x)?, ys, num_classes)?;
            let test = classification_scores(&predict(&test_x)?, &test_y, num_classes)?;
            Ok((train.into(), test.into()))
        })
        .collect::<AppResult<_>>()?;
    let (train_scores, test_scores): (Vec<Scores>, Vec<Scores>) = scored.into_iter().unzip();
    Ok(UtilityResult {
        classifier: format!("linear-softmax/downsample-{}", config.downsample),
        trained_on: source,
        shuffled_labels: shuffle_labels,
        permutations: labelings.len(),
        num_classes,
        chance: 1.0 / num_classes as f64,
        train_count: train_x.len(),
        test_count: test_x.len(),
        train: mean_scores(&train_scores),
        test: mean_scores(&test_scores),
    })
}

pub fn render_utility(results: &[UtilityResult]) -> String {
    let mut out = String::from("Utility (test split, macro-averaged)\n");
    out.push_str(&format!(
        "{:<10} {:>9} | {:>8} {:>9} {:>8} {:>8} | {:>5} {:>5}\n",
        "source", "labels", "Acc", "P", "R", "F1", "train", "test"
    ));
    for r in results {
        let t = r.test;
        out.push_str(&format!(
            "{:<10} {:>9} | {:>8.4} {:>9.4} {:>8.4} {:>8.4} | {:>5} {:>5}\n",
            serde_json::to_value(r.trained_on).expect("enum serializes").as_str().unwrap_or_default(),
            if r.shuffled_labels { "shuffled" } else { "true" },
            t.accuracy,
            t.precision,
            t.recall,
            t.f1,
            r.train_count,
            r.test_count
        ));
    }
    out.push_str(&format!(
        "classifier: {}; chance = {:.4}\n",
        results.first().map_or("", |r| r.classifier.as_str()),
        results.first().map_or(0.0, |r| r.chance)
    ));
    if let Some(r) = results.iter().find(|r| r.shuffled_labels) {
        out.push_str(&format!("shuffled rows average {} label permutations\n", r.permutations));
    }
    out
}
