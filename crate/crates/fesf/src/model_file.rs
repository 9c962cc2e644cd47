//! Versioned binary container for [`EnhancerModel`].
//!
//! All integers are little-endian `u32` unless noted; all reals are `f64` LE.
//!
//! ```text
//! magic        8 bytes  "FESFMDL\0"
//! version      u32      1
//! generator    network block
//! discriminator network block
//! meta         seed u64, epochs u64, steps u64,
//!              final_generator_loss, final_discriminator_loss,
//!              initial_fake_score, final_fake_score   (f64 each)
//!
//! network block:
//!   input_channels u32, residual u8, layer_count u32,
//!   layer_count × layer:
//!     tag u8 = 0 conv:       in, out, kernel_h, kernel_w, stride, padding (u32 each)
//!     tag u8 = 1 leaky relu: slope f64
//!     tag u8 = 2 sigmoid
//!   param_count u64, param_count × f64
//! ```
//!
//! The parameter count must equal the count implied by the layers, and
//! nothing may follow the meta block.

use std::fs;
use std::path::Path;

use fesf_core::iqem::{EnhancerModel, TrainingMeta};
use fesf_core::nn::{Architecture, Conv2d, Layer, Network};

use crate::error::{AppError, AppResult, IoContext};

pub const MAGIC: &[u8; 8] = b"FESFMDL\0";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("dimension fits in u32").to_le_bytes());
}

fn encode_network(out: &mut Vec<u8>, net: &Network) {
    put_u32(out, net.arch.input_channels);
    out.push(net.arch.residual as u8);
    put_u32(out, net.arch.layers.len());
    for layer in &net.arch.layers {
        match layer {
            Layer::Conv(c) => {
                out.push(0);
                for v in [c.in_channels, c.out_channels, c.kernel_h, c.kernel_w, c.stride, c.padding] {
                    put_u32(out, v);
                }
            }
            Layer::LeakyRelu(slope) => {
                out.push(1);
                out.extend_from_slice(&slope.to_le_bytes());
            }
            Layer::Sigmoid => out.push(2),
        }
    }
    out.extend_from_slice(&(net.params.len() as u64).to_le_bytes());
    for p in &net.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
}

pub fn encode(model: &EnhancerModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    encode_network(&mut out, &model.generator);
    encode_network(&mut out, &model.discriminator);
    let m = &model.meta;
    for v in [m.seed, m.epochs as u64, m.steps as u64] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in [
        m.final_generator_loss,
        m.final_discriminator_loss,
        m.initial_fake_score,
        m.final_fake_score,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn network(&mut self) -> Result<Network, String> {
        let input_channels = self.u32()?;
        let residual = match self.u8()? {
            0 => false,
            1 => true,
            b => return Err(format!("bad residual flag {b}")),
        };
        let count = self.u32()?;
        if count > 64 {
            return Err(format!("implausible layer count {count}"));
        }
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            layers.push(match self.u8()? {
                0 => Layer::Conv(Conv2d {
                    in_channels: self.u32()?,
                    out_channels: self.u32()?,
                    kernel_h: self.u32()?,
                    kernel_w: self.u32()?,
                    stride: self.u32()?,
                    padding: self.u32()?,
                }),
                1 => Layer::LeakyRelu(self.f64()?),
                2 => Layer::Sigmoid,
                t => return Err(format!("unknown layer tag {t}")),
            });
        }
        let arch = Architecture {
            input_channels,
            layers,
            residual,
        };
        let n = self.u64()? as usize;
        if n != arch.param_count() {
            return Err(format!("architecture needs {} parameters, file has {n}", arch.param_count()));
        }
        let raw = self.take(n.checked_mul(8).ok_or("parameter count overflows")?)?;
        let params = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Network::new(arch, params).map_err(|e| e.to_string())
    }
}

pub fn decode(bytes: &[u8]) -> Result<EnhancerModel, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("not an enhancer model file (bad magic)".into());
    }
    let version = r.u32()? as u32;
    if version != FORMAT_VERSION {
        return Err(format!("unsupported model format version {version}"));
    }
    let generator = r.network()?;
    let discriminator = r.network()?;
    let meta = TrainingMeta {
        seed: r.u64()?,
        epochs: r.u64()? as usize,
        steps: r.u64()? as usize,
        final_generator_loss: r.f64()?,
        final_discriminator_loss: r.f64()?,
        initial_fake_score: r.f64()?,
        final_fake_score: r.f64()?,
    };
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    if generator.arch.input_channels != discriminator.arch.input_channels {
        return Err("generator and discriminator disagree on channel count".into());
    }
    Ok(EnhancerModel {
        generator,
        discriminator,
        meta,
    })
}

pub fn save(path: &Path, model: &EnhancerModel) -> AppResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).at(parent)?;
    }
    fs::write(path, encode(model)).at(path)
}

pub fn load(path: &Path) -> AppResult<EnhancerModel> {
    let bytes = fs::read(path).at(path)?;
    decode(&bytes).map_err(|message| AppError::Decode {
        path: path.to_path_buf(),
        message,
    })
}
