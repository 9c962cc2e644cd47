//! Command-line front end. Flags override the TOML config, which overrides defaults.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fesf_core::iqem::{enhance, train_enhancer};
use fesf_core::{hide, refine, Image};

use crate::config::Config;
use crate::demo::{self, DemoOptions};
use crate::error::{AppError, AppResult, IoContext};
use crate::imageio;
use crate::model_file;
use crate::pipeline::{self, Population, Source};

#[derive(Debug, Parser)]
#[command(name = "fesf", version, about = "Hide images in the amplitude spectrum of a host image")]
pub struct Cli {
    /// TOML config file; flags given on the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hide one plaintext image in a host image.
    Hide {
        #[arg(long)]
        plaintext: PathBuf,
        #[arg(long)]
        host: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Re-embed the plaintext into a surrogate at low intensity.
    Refine {
        #[arg(long)]
        surrogate: PathBuf,
        #[arg(long)]
        plaintext: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        alpha_prime: Option<f64>,
        #[arg(long)]
        beta_prime: Option<f64>,
    },
    /// Train the enhancer on a directory of synthetic images.
    TrainEnhancer {
        #[arg(long)]
        synthetics: PathBuf,
        #[arg(long)]
        host: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Apply a trained enhancer to one image.
    Enhance {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Produce synthetic, surrogate and refined images for a whole dataset.
    Generate {
        #[arg(long)]
        data_root: Option<PathBuf>,
        /// CSV of `path,label` relative to the data root.
        #[arg(long)]
        label_table: Option<PathBuf>,
        #[arg(long)]
        host: Option<PathBuf>,
        /// Use this enhancer instead of training one.
        #[arg(long, conflicts_with = "no_enhancer")]
        model: Option<PathBuf>,
        /// Use synthetic images as surrogates.
        #[arg(long)]
        no_enhancer: bool,
        #[arg(long, num_args = 2, value_names = ["HEIGHT", "WIDTH"])]
        target: Option<Vec<usize>>,
        #[arg(long)]
        channels: Option<usize>,
        #[arg(long, num_args = 2, value_names = ["TRAIN", "TEST"])]
        split: Option<Vec<f64>>,
        #[command(flatten)]
        hiding: HidingArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Image-quality report over a manifest.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        population: PopulationArg,
        /// Directory for report.txt and report.jsonl; defaults to the manifest's.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and score the small classifier on one image source.
    Utility {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "refined")]
        source: SourceArg,
        /// Average over 64 random label permutations (no-signal control).
        #[arg(long)]
        shuffle_labels: bool,
        /// Write the result as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run everything on bundled procedural data.
    Demo {
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        enhancer_epochs: Option<usize>,
        #[command(flatten)]
        hiding: HidingArgs,
    },
}

#[derive(Debug, Args, Default)]
pub struct HidingArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub alpha_prime: Option<f64>,
    #[arg(long)]
    pub beta_prime: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub content_weight: Option<f64>,
    #[arg(long)]
    pub patch_size: Option<usize>,
    #[arg(long)]
    pub features: Option<usize>,
    #[arg(long)]
    pub grad_clip: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PopulationArg {
    All,
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SourceArg {
    Plaintext,
    Surrogate,
    Refined,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl HidingArgs {
    fn apply(&self, c: &mut Config) {
        set(&mut c.hiding.alpha, self.alpha);
        set(&mut c.hiding.beta, self.beta);
        set(&mut c.hiding.alpha_prime, self.alpha_prime);
        set(&mut c.hiding.beta_prime, self.beta_prime);
    }
}

impl TrainArgs {
    fn apply(&self, c: &mut Config) {
        set(&mut c.seed, self.seed);
        let e = &mut c.enhancer;
        set(&mut e.epochs, self.epochs);
        set(&mut e.batch_size, self.batch_size);
        set(&mut e.learning_rate, self.learning_rate);
        set(&mut e.content_weight, self.content_weight);
        set(&mut e.patch_size, self.patch_size);
        set(&mut e.features, self.features);
        set(&mut e.grad_clip, self.grad_clip);
    }
}

fn load_config(path: Option<&Path>) -> AppResult<Config> {
    let mut config = match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    config.apply_env();
    Ok(config)
}

fn load_like(path: &Path, reference: &Image) -> AppResult<Image> {
    imageio::load(path, reference.channels(), Some((reference.height(), reference.width())))
}

fn images_in(dir: &Path, channels: usize) -> AppResult<Vec<Image>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .at(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && imageio::has_image_extension(p))
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        match imageio::load(&p, channels, None) {
            Ok(img) => out.push(img),
            Err(e @ AppError::Decode { .. }) => log::warn!("skipping {e}"),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> AppResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(AppError::Usage(e.render().to_string().trim_end().to_string())),
    };
    let mut config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Hide {
            plaintext,
            host,
            out,
            alpha,
            beta,
        } => {
            set(&mut config.hiding.alpha, alpha);
            set(&mut config.hiding.beta, beta);
            let params = config.hide_params()?;
            let plain = imageio::load(&plaintext, config.dataset.channels, None)?;
            let host = load_like(&host, &plain)?;
            imageio::save_png(&out, &hide(&plain, &host, params)?)?;
            println!("wrote {}", out.display());
        }
        Command::Refine {
            surrogate,
            plaintext,
            out,
            alpha_prime,
            beta_prime,
        } => {
            set(&mut config.hiding.alpha_prime, alpha_prime);
            set(&mut config.hiding.beta_prime, beta_prime);
            let params = config.refine_params()?;
            let surrogate = imageio::load(&surrogate, config.dataset.channels, None)?;
            let plain = load_like(&plaintext, &surrogate)?;
            imageio::save_png(&out, &refine(&surrogate, &plain, params)?)?;
            println!("wrote {}", out.display());
        }
        Command::TrainEnhancer {
            synthetics,
            host,
            out,
            train,
        } => {
            train.apply(&mut config);
            let images = images_in(&synthetics, config.dataset.channels)?;
            let host = imageio::load(&host, config.dataset.channels, None)?;
            let model = train_enhancer(&images, &host, &config.train_config())?;
            model_file::save(&out, &model)?;
            println!(
                "trained on {} images, {} steps; discriminator score on generated patches {:.4} -> {:.4}; wrote {}",
                images.len(),
                model.meta.steps,
                model.meta.initial_fake_score,
                model.meta.final_fake_score,
                out.display()
            );
        }
        Command::Enhance { model, input, out } => {
            let model = model_file::load(&model)?;
            let img = imageio::load(&input, model.channels(), None)?;
            imageio::save_png(&out, &enhance(&model, &img)?)?;
            println!("wrote {}", out.display());
        }
        Command::Generate {
            data_root,
            label_table,
            host,
            model,
            no_enhancer,
            target,
            channels,
            split,
            hiding,
            train,
            output,
        } => {
            if data_root.is_some() {
                config.dataset.root = data_root;
            }
            if label_table.is_some() {
                config.dataset.label_table = label_table;
            }
            if host.is_some() {
                config.host.path = host;
            }
            if let Some(t) = target {
                config.dataset.target = [t[0], t[1]];
            }
            if let Some(s) = split {
                config.dataset.split = [s[0], s[1]];
            }
            set(&mut config.dataset.channels, channels);
            set(&mut config.output.root, output);
            if no_enhancer {
                config.enhancer.enabled = false;
            }
            hiding.apply(&mut config);
            train.apply(&mut config);
            let (dataset, manifest) = pipeline::run_generate(&config, model.as_deref())?;
            let failed = manifest.entries.iter().filter(|e| e.error.is_some()).count();
            println!(
                "{} entries ({} failed, {} inputs skipped); manifest {}",
                manifest.entries.len(),
                failed,
                dataset.skipped.len(),
                config.output.root.join(pipeline::MANIFEST_FILE).display()
            );
        }
        Command::Evaluate {
            manifest,
            population,
            out,
        } => {
            let population = match population {
                PopulationArg::All => Population::All,
                PopulationArg::Train => Population::Train,
                PopulationArg::Test => Population::Test,
            };
            let eval = pipeline::evaluate(&manifest, population)?;
            let dir = out.unwrap_or_else(|| manifest.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf));
            pipeline::write_report(&dir, &eval)?;
            print!("{}", eval.report.render_table());
            for (id, err) in &eval.entry_errors {
                eprintln!("error: {id}: {err}");
            }
        }
        Command::Utility {
            manifest,
            source,
            shuffle_labels,
            out,
        } => {
            let source = match source {
                SourceArg::Plaintext => Source::Plaintext,
                SourceArg::Surrogate => Source::Surrogate,
                SourceArg::Refined => Source::Refined,
            };
            let result = pipeline::utility(&manifest, source, &config.classifier_config(), shuffle_labels)?;
            print!("{}", pipeline::render_utility(std::slice::from_ref(&result)));
            if let Some(out) = out {
                let json = serde_json::to_string_pretty(&result).expect("utility serializes") + "\n";
                fs::write(&out, json).at(&out)?;
            }
        }
        Command::Demo {
            output,
            seed,
            per_class,
            size,
            enhancer_epochs,
            hiding,
        } => {
            hiding.apply(&mut config);
            let mut opts = DemoOptions::new(output.unwrap_or_else(|| config.output.root.clone()));
            opts.seed = seed.unwrap_or(config.seed);
            set(&mut opts.per_class, per_class);
            set(&mut opts.size, size);
            set(&mut opts.enhancer_epochs, enhancer_epochs);
            opts.params = config.hide_params()?;
            opts.params_prime = config.refine_params()?;
            let summary = demo::run(&opts)?;
            print!("{}", summary.evaluation.report.render_table());
            println!();
            print!("{}", pipeline::render_utility(&summary.utility));
            println!("manifest: {}", summary.manifest_path.display());
        }
    }
    Ok(())
}
