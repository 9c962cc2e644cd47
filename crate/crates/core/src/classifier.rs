//! Small softmax classifier for utility checks, plus accuracy/precision/recall/F1.
//!
//! Images are box-downsampled, standardized per feature with training-set
//! statistics and fed to a single convolution whose kernel covers the whole
//! downsampled image, i.e. a linear layer expressed with [`crate::nn`].

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{Image, Shape};
use crate::nn::{Architecture, Conv2d, Layer, Network, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Box-filter factor applied before the linear layer.
    pub downsample: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 16,
            learning_rate: 0.05,
            weight_decay: 1e-3,
            seed: 0,
            downsample: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    net: Network,
    num_classes: usize,
    downsample: usize,
    input_shape: Shape,
    feature_mean: Vec<f64>,
    feature_scale: Vec<f64>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| libm::exp(l - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl Classifier {
    fn features(&self, image: &Image) -> Result<Tensor> {
        self.input_shape.expect(image.shape())?;
        let mut t = Tensor::from_image(&image.downsample(self.downsample)?);
        for ((v, m), s) in t.data.iter_mut().zip(&self.feature_mean).zip(&self.feature_scale) {
            *v = (*v - m) / s;
        }
        Ok(t)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn predict(&self, image: &Image) -> Result<usize> {
        let logits = self.net.forward(&self.features(image)?)?;
        Ok(logits
            .data
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
            .0)
    }

    /// Fits a classifier with mini-batch SGD on softmax cross-entropy.
    pub fn train(images: &[Image], labels: &[usize], config: &ClassifierConfig) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::Empty("training images"));
        }
        if images.len() != labels.len() {
            return Err(Error::Invalid("one label per image is required".into()));
        }
        if config.epochs == 0 || config.batch_size == 0 || !(config.learning_rate > 0.0) {
            return Err(Error::Invalid("epochs, batch_size and learning_rate must be positive".into()));
        }
        let num_classes = labels.iter().max().map_or(0, |m| m + 1);
        let distinct = (0..num_classes).filter(|c| labels.contains(c)).count();
        if distinct < 2 {
            return Err(Error::Invalid("at least two classes are required".into()));
        }
        let input_shape = images[0].shape();
        let mut raw = Vec::with_capacity(images.len());
        for img in images {
            input_shape.expect(img.shape())?;
            raw.push(Tensor::from_image(&img.downsample(config.downsample)?));
        }
        let dims = (raw[0].channels, raw[0].height, raw[0].width);
        let nf = raw[0].data.len();
        let n = raw.len() as f64;
        let mut feature_mean = vec![0.0; nf];
        for t in &raw {
            feature_mean.iter_mut().zip(&t.data).for_each(|(m, v)| *m += v / n);
        }
        let mut feature_scale = vec![0.0; nf];
        for t in &raw {
            feature_scale
                .iter_mut()
                .zip(t.data.iter().zip(&feature_mean))
                .for_each(|(s, (v, m))| *s += (v - m) * (v - m) / n);
        }
        feature_scale.iter_mut().for_each(|s| *s = libm::sqrt(*s).max(1e-6));
        for t in raw.iter_mut() {
            for ((v, m), s) in t.data.iter_mut().zip(&feature_mean).zip(&feature_scale) {
                *v = (*v - m) / s;
            }
        }

        let arch = Architecture {
            input_channels: dims.0,
            layers: vec![Layer::Conv(Conv2d {
                in_channels: dims.0,
                out_channels: num_classes,
                kernel_h: dims.1,
                kernel_w: dims.2,
                stride: 1,
                padding: 0,
            })],
            residual: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = arch.init(&mut rng);
        // a linear model has no ReLU to compensate for; shrink He init accordingly
        params.iter_mut().for_each(|p| *p *= 0.1);
        let mut net = Network::new(arch, params)?;

        let mut order: Vec<usize> = (0..raw.len()).collect();
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(config.batch_size) {
                let mut grad = vec![0.0; net.params.len()];
                for &i in batch {
                    let (logits, acts) = net.forward_traced(&raw[i])?;
                    let mut g = logits.clone();
                    let probs = softmax(&logits.data);
                    for (k, gv) in g.data.iter_mut().enumerate() {
                        let target = if k == labels[i] { 1.0 } else { 0.0 };
                        *gv = (probs[k] - target) / batch.len() as f64;
                    }
                    net.backward(&acts, &logits, &g, &mut grad);
                }
                grad.iter_mut()
                    .zip(&net.params)
                    .for_each(|(g, p)| *g += config.weight_decay * p);
                net.sgd_step(&grad, config.learning_rate, 0.0)?;
            }
        }
        Ok(Self {
            net,
            num_classes,
            downsample: config.downsample,
            input_shape,
            feature_mean,
            feature_scale,
        })
    }
}

/// Accuracy and macro-averaged precision, recall and F1, all in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationScores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Scores from a confusion matrix. Per-class F1 is the harmonic mean of that
/// class's precision and recall; undefined ratios count as 0.
pub fn classification_scores(predicted: &[usize], actual: &[usize], num_classes: usize) -> Result<ClassificationScores> {
    if predicted.len() != actual.len() {
        return Err(Error::Invalid("prediction and label counts differ".into()));
    }
    if predicted.is_empty() || num_classes == 0 {
        return Err(Error::Empty("predictions"));
    }
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for (&p, &a) in predicted.iter().zip(actual) {
        if p >= num_classes || a >= num_classes {
            return Err(Error::Invalid("class index out of range".into()));
        }
        confusion[a][p] += 1;
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let correct: usize = (0..num_classes).map(|k| confusion[k][k]).sum();
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    for k in 0..num_classes {
        let tp = confusion[k][k];
        let predicted_k: usize = (0..num_classes).map(|a| confusion[a][k]).sum();
        let actual_k: usize = confusion[k].iter().sum();
        let p = ratio(tp, predicted_k);
        let r = ratio(tp, actual_k);
        p_sum += p;
        r_sum += r;
        f_sum += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }
    let k = num_classes as f64;
    Ok(ClassificationScores {
        accuracy: ratio(correct, predicted.len()),
        precision: p_sum / k,
        recall: r_sum / k,
        f1: f_sum / k,
    })
}
