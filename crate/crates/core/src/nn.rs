//! Tiny convolutional networks with hand-written backpropagation.
//!
//! Parameters live in one flat vector per network; the [`Architecture`]
//! alone determines its length and layout (per conv layer: weights
//! `[out][in][kh][kw]` followed by `out` biases).

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};

/// Dense C×H×W activation buffer. Unlike [`crate::Image`] it carries no range contract.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_image(image: &crate::Image) -> Self {
        Self {
            channels: image.channels(),
            height: image.height(),
            width: image.width(),
            data: image.data().to_vec(),
        }
    }

    pub fn same_dims(&self, other: &Tensor) -> bool {
        (self.channels, self.height, self.width) == (other.channels, other.height, other.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2d {
    pub fn square(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel_h: kernel,
            kernel_w: kernel,
            stride,
            padding,
        }
    }

    pub fn weight_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel_h * self.kernel_w
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.out_channels
    }

    fn output_dims(&self, height: usize, width: usize) -> Option<(usize, usize)> {
        let ph = height + 2 * self.padding;
        let pw = width + 2 * self.padding;
        if ph < self.kernel_h || pw < self.kernel_w || self.stride == 0 {
            return None;
        }
        Some(((ph - self.kernel_h) / self.stride + 1, (pw - self.kernel_w) / self.stride + 1))
    }

    /// Output columns `x` whose input column `x·stride + kx − padding` is inside `0..width`.
    fn valid_range(&self, k: usize, out_len: usize, in_len: usize) -> (usize, usize) {
        let (s, p) = (self.stride, self.padding);
        // smallest x with x·s + k ≥ p
        let lo = if k >= p { 0 } else { (p - k).div_ceil(s) };
        // largest x with x·s + k − p ≤ in_len − 1
        let hi = if in_len + p > k { ((in_len + p - 1 - k) / s + 1).min(out_len) } else { 0 };
        (lo, hi.max(lo))
    }

    fn forward(&self, params: &[f64], input: &Tensor) -> Tensor {
        let (oh, ow) = self
            .output_dims(input.height, input.width)
            .expect("validated by Architecture::output_dims");
        let (kh, kw) = (self.kernel_h, self.kernel_w);
        let (s, p) = (self.stride, self.padding);
        let (weights, bias) = params.split_at(self.weight_count());
        let mut out = Tensor::zeros(self.out_channels, oh, ow);
        let plane_in = input.height * input.width;
        for o in 0..self.out_channels {
            let plane = &mut out.data[o * oh * ow..(o + 1) * oh * ow];
            plane.iter_mut().for_each(|v| *v = bias[o]);
            for i in 0..self.in_channels {
                let src = &input.data[i * plane_in..(i + 1) * plane_in];
                for ky in 0..kh {
                    let (y_lo, y_hi) = self.valid_range(ky, oh, input.height);
                    for kx in 0..kw {
                        let wv = weights[((o * self.in_channels + i) * kh + ky) * kw + kx];
                        let (x_lo, x_hi) = self.valid_range(kx, ow, input.width);
                        for y in y_lo..y_hi {
                            let row = &src[(y * s + ky - p) * input.width..];
                            let dst = &mut plane[y * ow..(y + 1) * ow];
                            for x in x_lo..x_hi {
                                dst[x] += wv * row[x * s + kx - p];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn backward(&self, params: &[f64], input: &Tensor, grad_out: &Tensor, grad_params: &mut [f64]) -> Tensor {
        let (oh, ow) = (grad_out.height, grad_out.width);
        let (kh, kw) = (self.kernel_h, self.kernel_w);
        let (s, p) = (self.stride, self.padding);
        let weights = &params[..self.weight_count()];
        let (gw, gb) = grad_params.split_at_mut(self.weight_count());
        let mut grad_in = Tensor::zeros(input.channels, input.height, input.width);
        let plane_in = input.height * input.width;
        for o in 0..self.out_channels {
            let g = &grad_out.data[o * oh * ow..(o + 1) * oh * ow];
            gb[o] += g.iter().sum::<f64>();
            for i in 0..self.in_channels {
                let src = &input.data[i * plane_in..(i + 1) * plane_in];
                let dst = &mut grad_in.data[i * plane_in..(i + 1) * plane_in];
                for ky in 0..kh {
                    let (y_lo, y_hi) = self.valid_range(ky, oh, input.height);
                    for kx in 0..kw {
                        let widx = ((o * self.in_channels + i) * kh + ky) * kw + kx;
                        let wv = weights[widx];
                        let (x_lo, x_hi) = self.valid_range(kx, ow, input.width);
                        let mut acc = 0.0;
                        for y in y_lo..y_hi {
                            let base = (y * s + ky - p) * input.width;
                            let grow = &g[y * ow..(y + 1) * ow];
                            for x in x_lo..x_hi {
                                let gv = grow[x];
                                let idx = base + x * s + kx - p;
                                acc += gv * src[idx];
                                dst[idx] += wv * gv;
                            }
                        }
                        gw[widx] += acc;
                    }
                }
            }
        }
        grad_in
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Layer {
    Conv(Conv2d),
    LeakyRelu(f64),
    Sigmoid,
}

impl Layer {
    pub fn param_count(&self) -> usize {
        match self {
            Layer::Conv(c) => c.param_count(),
            _ => 0,
        }
    }
}

/// Layer stack, optionally wrapped in a residual connection `y = x + f(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub input_channels: usize,
    pub layers: Vec<Layer>,
    pub residual: bool,
}

impl Architecture {
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Offsets of each layer's slice in the flat parameter vector.
    pub fn param_offsets(&self) -> Vec<(usize, usize)> {
        let mut offset = 0;
        self.layers
            .iter()
            .map(|l| {
                let start = offset;
                offset += l.param_count();
                (start, offset)
            })
            .collect()
    }

    /// Output dimensions for an input of the given size, or an error when a
    /// layer does not fit or channel counts disagree.
    pub fn output_dims(&self, channels: usize, height: usize, width: usize) -> Result<(usize, usize, usize)> {
        if channels != self.input_channels {
            return Err(Error::Invalid(alloc::format!(
                "network expects {} input channels, got {channels}",
                self.input_channels
            )));
        }
        let mut dims = (channels, height, width);
        for layer in &self.layers {
            if let Layer::Conv(conv) = layer {
                if conv.in_channels != dims.0 {
                    return Err(Error::Invalid(alloc::format!(
                        "conv expects {} channels, previous layer yields {}",
                        conv.in_channels, dims.0
                    )));
                }
                let (h, w) = conv.output_dims(dims.1, dims.2).ok_or_else(|| {
                    Error::Invalid(alloc::format!(
                        "{}x{} input too small for {}x{} kernel",
                        dims.1, dims.2, conv.kernel_h, conv.kernel_w
                    ))
                })?;
                dims = (conv.out_channels, h, w);
            }
        }
        if self.residual && dims != (channels, height, width) {
            return Err(Error::Invalid(
                "residual network must preserve its input dimensions".into(),
            ));
        }
        Ok(dims)
    }

    /// He-uniform weights, zero biases.
    pub fn init<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut params = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            if let Layer::Conv(conv) = layer {
                let fan_in = (conv.in_channels * conv.kernel_h * conv.kernel_w) as f64;
                let bound = libm::sqrt(6.0 / fan_in);
                for _ in 0..conv.weight_count() {
                    params.push(rng.random_range(-bound..bound));
                }
                params.extend(core::iter::repeat_n(0.0, conv.out_channels));
            }
        }
        params
    }
}

/// An architecture paired with its parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub arch: Architecture,
    pub params: Vec<f64>,
}

impl Network {
    pub fn new(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        if params.len() != arch.param_count() {
            return Err(Error::Invalid(alloc::format!(
                "architecture needs {} parameters, got {}",
                arch.param_count(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged("non-finite network parameter".into()));
        }
        Ok(Self { arch, params })
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        Ok(self.forward_traced(input)?.0)
    }

    /// Forward pass that also returns every layer's input for [`Network::backward`].
    pub fn forward_traced(&self, input: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        self.arch.output_dims(input.channels, input.height, input.width)?;
        let offsets = self.arch.param_offsets();
        let mut acts = Vec::with_capacity(self.arch.layers.len() + 1);
        let mut current = input.clone();
        for (layer, &(start, end)) in self.arch.layers.iter().zip(&offsets) {
            let next = match layer {
                Layer::Conv(conv) => conv.forward(&self.params[start..end], &current),
                Layer::LeakyRelu(slope) => {
                    let mut t = current.clone();
                    t.data.iter_mut().for_each(|v| {
                        if *v < 0.0 {
                            *v *= slope
                        }
                    });
                    t
                }
                Layer::Sigmoid => {
                    let mut t = current.clone();
                    t.data.iter_mut().for_each(|v| *v = sigmoid(*v));
                    t
                }
            };
            acts.push(current);
            current = next;
        }
        if self.arch.residual {
            current.data.iter_mut().zip(&input.data).for_each(|(o, x)| *o += x);
        }
        Ok((current, acts))
    }

    /// Accumulates parameter gradients into `grad_params` and returns the
    /// gradient with respect to the network input.
    pub fn backward(
        &self,
        acts: &[Tensor],
        output: &Tensor,
        grad_output: &Tensor,
        grad_params: &mut [f64],
    ) -> Tensor {
        debug_assert_eq!(grad_params.len(), self.params.len());
        let offsets = self.arch.param_offsets();
        let mut grad = grad_output.clone();
        for k in (0..self.arch.layers.len()).rev() {
            let (start, end) = offsets[k];
            let layer_in = &acts[k];
            grad = match &self.arch.layers[k] {
                Layer::Conv(conv) => conv.backward(
                    &self.params[start..end],
                    layer_in,
                    &grad,
                    &mut grad_params[start..end],
                ),
                Layer::LeakyRelu(slope) => {
                    let mut g = grad;
                    g.data
                        .iter_mut()
                        .zip(&layer_in.data)
                        .for_each(|(g, x)| {
                            if *x < 0.0 {
                                *g *= slope
                            }
                        });
                    g
                }
                Layer::Sigmoid => {
                    let layer_out = if k + 1 < acts.len() {
                        &acts[k + 1]
                    } else {
                        output
                    };
                    let mut g = grad;
                    g.data
                        .iter_mut()
                        .zip(&layer_out.data)
                        .for_each(|(g, s)| *g *= s * (1.0 - s));
                    g
                }
            };
        }
        if self.arch.residual {
            grad.data.iter_mut().zip(&grad_output.data).for_each(|(g, go)| *g += go);
        }
        grad
    }

    /// Plain SGD step with the gradient rescaled to at most `clip` in L2 norm.
    pub fn sgd_step(&mut self, grad: &[f64], learning_rate: f64, clip: f64) -> Result<()> {
        let norm = libm::sqrt(grad.iter().map(|g| g * g).sum::<f64>());
        if !norm.is_finite() {
            return Err(Error::Diverged("non-finite gradient".into()));
        }
        let scale = if clip > 0.0 && norm > clip {
            clip / norm
        } else {
            1.0
        };
        for (p, g) in self.params.iter_mut().zip(grad) {
            *p -= learning_rate * scale * g;
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}
