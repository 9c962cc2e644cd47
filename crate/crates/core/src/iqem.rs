//! Adversarial enhancement of synthetic images toward the host domain.
//!
//! A residual generator `G` maps synthetics toward the host and a patch
//! discriminator `D` tells host patches from generated ones. They play
//!
//! ```text
//! min_G max_D  E[log D(x_host)] + E[log(1 − D(G(x_syn)))]
//! ```
//!
//! with the usual non-saturating generator loss `−E[log D(G(x))]`, plus a
//! content term `λ·mean|G(x) − x|` that keeps every output tied to its own
//! input. The generator's last layer starts at zero, so an untrained model
//! is the identity.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::{Architecture, Conv2d, Layer, Network, Tensor};

/// Probabilities are clamped to `[ε, 1 − ε]` before taking logarithms.
pub const SCORE_EPSILON: f64 = 1e-7;
pub const LEAKY_SLOPE: f64 = 0.2;

fn clamp_score(s: f64) -> f64 {
    s.clamp(SCORE_EPSILON, 1.0 - SCORE_EPSILON)
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    values.sum::<f64>() / n as f64
}

/// `(generator_loss, discriminator_loss)` for post-sigmoid scores.
///
/// `discriminator_loss = −mean log d_real − mean log(1 − d_fake)` and
/// `generator_loss = −mean log d_fake`.
pub fn gan_losses(d_real: &[f64], d_fake: &[f64]) -> Result<(f64, f64)> {
    if d_real.is_empty() || d_fake.is_empty() {
        return Err(Error::Empty("discriminator scores"));
    }
    let real = mean(d_real.iter().map(|&s| -libm::log(clamp_score(s))));
    let fake = mean(d_fake.iter().map(|&s| -libm::log(1.0 - clamp_score(s))));
    let gen = mean(d_fake.iter().map(|&s| -libm::log(clamp_score(s))));
    Ok((gen, real + fake))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Weight λ of the `mean|G(x) − x|` content term.
    pub content_weight: f64,
    pub seed: u64,
    /// Side of the square training crops.
    pub patch_size: usize,
    /// Hidden channels in both networks.
    pub features: usize,
    /// Global L2 bound on each gradient step; `0` disables clipping.
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 1,
            learning_rate: 0.2,
            content_weight: 0.3,
            seed: 0,
            patch_size: 32,
            features: 4,
            // keeps the L1 content term's subgradient oscillation below ~0.01 per pixel
            grad_clip: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Invalid("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Invalid("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid("learning_rate must be positive".into()));
        }
        if !(self.content_weight >= 0.0 && self.content_weight.is_finite()) {
            return Err(Error::Invalid("content_weight must be nonnegative".into()));
        }
        if self.patch_size < 4 {
            return Err(Error::Invalid("patch_size must be at least 4".into()));
        }
        if self.features == 0 {
            return Err(Error::Invalid("features must be at least 1".into()));
        }
        if !(self.grad_clip >= 0.0 && self.grad_clip.is_finite()) {
            return Err(Error::Invalid("grad_clip must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Bookkeeping recorded alongside trained parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub steps: usize,
    pub final_generator_loss: f64,
    pub final_discriminator_loss: f64,
    /// Mean discriminator score on generated training patches before the first step.
    pub initial_fake_score: f64,
    /// Same after the last step.
    pub final_fake_score: f64,
}

/// Residual 3-layer generator: conv3×3 → LReLU → conv3×3 → LReLU → conv1×1, plus skip.
pub fn generator_architecture(channels: usize, features: usize) -> Architecture {
    Architecture {
        input_channels: channels,
        layers: vec![
            Layer::Conv(Conv2d::square(channels, features, 3, 1, 1)),
            Layer::LeakyRelu(LEAKY_SLOPE),
            Layer::Conv(Conv2d::square(features, features, 3, 1, 1)),
            Layer::LeakyRelu(LEAKY_SLOPE),
            Layer::Conv(Conv2d::square(features, channels, 1, 1, 0)),
        ],
        residual: true,
    }
}

/// Patch discriminator: two stride-2 conv3×3 blocks and a 1×1 scoring conv.
pub fn discriminator_architecture(channels: usize, features: usize) -> Architecture {
    Architecture {
        input_channels: channels,
        layers: vec![
            Layer::Conv(Conv2d::square(channels, features, 3, 2, 1)),
            Layer::LeakyRelu(LEAKY_SLOPE),
            Layer::Conv(Conv2d::square(features, features, 3, 2, 1)),
            Layer::LeakyRelu(LEAKY_SLOPE),
            Layer::Conv(Conv2d::square(features, 1, 1, 1, 0)),
            Layer::Sigmoid,
        ],
        residual: false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnhancerModel {
    pub generator: Network,
    pub discriminator: Network,
    pub meta: TrainingMeta,
}

impl EnhancerModel {
    /// The untrained starting point of [`train_enhancer`] for `config.seed`.
    /// Its generator is exactly the identity map.
    pub fn initialize(channels: usize, config: &TrainConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::initialize_with(channels, config, &mut rng)
    }

    fn initialize_with(channels: usize, config: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Empty("image channels"));
        }
        let g_arch = generator_architecture(channels, config.features);
        let mut g_params = g_arch.init(rng);
        let (last_start, last_end) = *g_arch.param_offsets().last().expect("generator has layers");
        g_params[last_start..last_end].iter_mut().for_each(|p| *p = 0.0);
        let d_arch = discriminator_architecture(channels, config.features);
        let d_params = d_arch.init(rng);
        Ok(Self {
            generator: Network::new(g_arch, g_params)?,
            discriminator: Network::new(d_arch, d_params)?,
            meta: TrainingMeta {
                seed: config.seed,
                ..TrainingMeta::default()
            },
        })
    }

    pub fn channels(&self) -> usize {
        self.generator.arch.input_channels
    }

    /// Raw generator output, before clamping.
    pub fn generate(&self, input: &Tensor) -> Result<Tensor> {
        self.generator.forward(input)
    }

    /// Mean discriminator probability over all patches of all inputs.
    pub fn discriminator_score(&self, inputs: &[Tensor]) -> Result<f64> {
        let mut total = 0.0;
        let mut n = 0usize;
        for x in inputs {
            let s = self.discriminator.forward(x)?;
            total += s.data.iter().sum::<f64>();
            n += s.data.len();
        }
        Ok(total / n.max(1) as f64)
    }
}

/// Discriminator loss and its gradient with respect to the discriminator parameters.
pub fn discriminator_loss_and_grad(
    model: &EnhancerModel,
    reals: &[Tensor],
    synthetics: &[Tensor],
) -> Result<(f64, Vec<f64>)> {
    let fakes = synthetics
        .iter()
        .map(|x| model.generator.forward(x))
        .collect::<Result<Vec<_>>>()?;
    let d = &model.discriminator;
    let mut grad = vec![0.0; d.params.len()];
    let mut loss = 0.0;
    for (batch, target_real) in [(reals, true), (fakes.as_slice(), false)] {
        let total: usize = batch
            .iter()
            .map(|x| d.arch.output_dims(x.channels, x.height, x.width).map(|(c, h, w)| c * h * w))
            .sum::<Result<usize>>()?;
        for x in batch {
            let (scores, acts) = d.forward_traced(x)?;
            let mut g = scores.clone();
            for (gv, &s) in g.data.iter_mut().zip(&scores.data) {
                let clamped = clamp_score(s);
                let (l, dl) = if target_real {
                    (-libm::log(clamped), -1.0 / clamped)
                } else {
                    (-libm::log(1.0 - clamped), 1.0 / (1.0 - clamped))
                };
                loss += l / total as f64;
                *gv = if clamped == s { dl / total as f64 } else { 0.0 };
            }
            d.backward(&acts, &scores, &g, &mut grad);
        }
    }
    Ok((loss, grad))
}

/// Generator objective `−mean log D(G(x)) + λ·mean|G(x) − x|` and its gradient
/// with respect to the generator parameters. Returns `(objective, adversarial part, grad)`.
pub fn generator_loss_and_grad(
    model: &EnhancerModel,
    synthetics: &[Tensor],
    content_weight: f64,
) -> Result<(f64, f64, Vec<f64>)> {
    let (g, d) = (&model.generator, &model.discriminator);
    let mut grad = vec![0.0; g.params.len()];
    let mut d_scratch = vec![0.0; d.params.len()];
    let mut traces = Vec::with_capacity(synthetics.len());
    let mut score_total = 0usize;
    let mut pixel_total = 0usize;
    for x in synthetics {
        let (fake, g_acts) = g.forward_traced(x)?;
        let (scores, d_acts) = d.forward_traced(&fake)?;
        score_total += scores.data.len();
        pixel_total += fake.data.len();
        traces.push((fake, g_acts, scores, d_acts));
    }
    let mut adversarial = 0.0;
    let mut content = 0.0;
    for (x, (fake, g_acts, scores, d_acts)) in synthetics.iter().zip(&traces) {
        let mut g_scores = scores.clone();
        for (gv, &s) in g_scores.data.iter_mut().zip(&scores.data) {
            let clamped = clamp_score(s);
            adversarial += -libm::log(clamped) / score_total as f64;
            *gv = if clamped == s {
                -1.0 / (clamped * score_total as f64)
            } else {
                0.0
            };
        }
        let mut g_fake = d.backward(d_acts, scores, &g_scores, &mut d_scratch);
        for ((gv, &y), &xv) in g_fake.data.iter_mut().zip(&fake.data).zip(&x.data) {
            let diff = y - xv;
            content += diff.abs() / pixel_total as f64;
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            *gv += content_weight * sign / pixel_total as f64;
        }
        g.backward(g_acts, fake, &g_fake, &mut grad);
    }
    Ok((adversarial + content_weight * content, adversarial, grad))
}

fn random_crop(image: &Image, patch: usize, rng: &mut ChaCha8Rng) -> Result<Tensor> {
    let (h, w) = (image.height(), image.width());
    let (ph, pw) = (patch.min(h), patch.min(w));
    let top = rng.random_range(0..=h - ph);
    let left = rng.random_range(0..=w - pw);
    Ok(Tensor::from_image(&image.crop(top, left, ph, pw)?))
}

/// Trains `G` and `D` with alternating SGD steps: one discriminator step,
/// then one generator step, per mini-batch. Deterministic given `config.seed`.
pub fn train_enhancer(synthetics: &[Image], host: &Image, config: &TrainConfig) -> Result<EnhancerModel> {
    config.validate()?;
    if synthetics.is_empty() {
        return Err(Error::Empty("synthetic training images"));
    }
    if synthetics.len() < 2 {
        return Err(Error::Invalid("at least two synthetic images are required".into()));
    }
    let channels = host.channels();
    for s in synthetics {
        if s.channels() != channels {
            return Err(Error::ShapeMismatch {
                expected: host.shape(),
                found: s.shape(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = EnhancerModel::initialize_with(channels, config, &mut rng)?;
    // Probe crops come from a separate stream so they do not perturb training.
    let mut probe_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f_9e0b);
    let probe = synthetics
        .iter()
        .map(|s| random_crop(s, config.patch_size, &mut probe_rng))
        .collect::<Result<Vec<_>>>()?;
    let probe_fake = |m: &EnhancerModel| -> Result<f64> {
        let fakes = probe.iter().map(|x| m.generate(x)).collect::<Result<Vec<_>>>()?;
        m.discriminator_score(&fakes)
    };
    model.meta.initial_fake_score = probe_fake(&model)?;

    let mut order: Vec<usize> = (0..synthetics.len()).collect();
    let mut steps = 0;
    let (mut last_g, mut last_d) = (f64::NAN, f64::NAN);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let xs = batch
                .iter()
                .map(|&i| random_crop(&synthetics[i], config.patch_size, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let reals = (0..batch.len())
                .map(|_| random_crop(host, config.patch_size, &mut rng))
                .collect::<Result<Vec<_>>>()?;

            let (d_loss, d_grad) = discriminator_loss_and_grad(&model, &reals, &xs)?;
            if !d_loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "discriminator loss {d_loss} at epoch {epoch}, step {steps}"
                )));
            }
            model
                .discriminator
                .sgd_step(&d_grad, config.learning_rate, config.grad_clip)?;

            let (g_loss, _, g_grad) = generator_loss_and_grad(&model, &xs, config.content_weight)?;
            if !g_loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "generator loss {g_loss} at epoch {epoch}, step {steps}"
                )));
            }
            model
                .generator
                .sgd_step(&g_grad, config.learning_rate, config.grad_clip)?;
            if model
                .generator
                .params
                .iter()
                .chain(&model.discriminator.params)
                .any(|p| !p.is_finite())
            {
                return Err(Error::Diverged(format!(
                    "non-finite parameter at epoch {epoch}, step {steps}"
                )));
            }
            steps += 1;
            last_g = g_loss;
            last_d = d_loss;
        }
    }
    model.meta.epochs = config.epochs;
    model.meta.steps = steps;
    model.meta.final_generator_loss = last_g;
    model.meta.final_discriminator_loss = last_d;
    model.meta.final_fake_score = probe_fake(&model)?;
    Ok(model)
}

/// Surrogate `clamp(G(x))`.
pub fn enhance(model: &EnhancerModel, synthetic: &Image) -> Result<Image> {
    if synthetic.channels() != model.channels() {
        return Err(Error::ShapeMismatch {
            expected: crate::image::Shape::new(model.channels(), synthetic.height(), synthetic.width()),
            found: synthetic.shape(),
        });
    }
    let out = model.generate(&Tensor::from_image(synthetic))?;
    if let Some(index) = out.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(Image::new(synthetic.shape(), out.data)?.clamped())
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::LN_2;

    #[test]
    fn equilibrium_losses() {
        let (g, d) = gan_losses(&[0.5; 6], &[0.5; 6]).unwrap();
        assert_eq!(d, 2.0 * LN_2);
        assert_eq!(g, LN_2);
    }

    #[test]
    fn hand_evaluated_losses() {
        let (_, d) = gan_losses(&[0.8], &[0.3]).unwrap();
        let expected = -libm::log(0.8) - libm::log(0.7);
        assert!((d - expected).abs() < 1e-15);
        assert!((d - 0.5798).abs() < 1e-4);
    }

    #[test]
    fn perfect_discriminator_limit_and_clamping() {
        let (g, d) = gan_losses(&[1.0], &[0.0]).unwrap();
        assert!(d < 1e-6 && d >= 0.0);
        assert!(g.is_finite() && g > 15.0);
        // out-of-range scores are clamped, not rejected
        let (g2, d2) = gan_losses(&[1.5], &[-0.2]).unwrap();
        assert_eq!((g2, d2), (g, d));
        assert!(gan_losses(&[], &[0.5]).is_err());
    }

    #[test]
    fn initialized_generator_is_identity() {
        let model = EnhancerModel::initialize(3, &TrainConfig::default()).unwrap();
        let img = Image::from_fn(crate::Shape::new(3, 9, 7), |c, h, w| {
            ((c + 2 * h + 3 * w) % 10) as f64 / 10.0
        })
        .unwrap();
        assert_eq!(enhance(&model, &img).unwrap(), img);
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.epochs = 0;
        assert!(c.validate().is_err());
        c = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn enhance_rejects_channel_mismatch() {
        let model = EnhancerModel::initialize(3, &TrainConfig::default()).unwrap();
        let img = Image::filled(crate::Shape::new(1, 8, 8), 0.5).unwrap();
        assert!(matches!(enhance(&model, &img), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn training_rejects_too_few_images() {
        let img = Image::filled(crate::Shape::new(1, 8, 8), 0.5).unwrap();
        assert!(matches!(
            train_enhancer(&[], &img, &TrainConfig::default()),
            Err(Error::Empty(_))
        ));
        assert!(train_enhancer(&[img.clone()], &img, &TrainConfig::default()).is_err());
    }
}
