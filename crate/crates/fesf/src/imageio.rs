//! Reading rasters of any supported format and writing 16-bit PNGs.

use std::fs;
use std::path::Path;

use fesf_core::{Image, Shape};
use image::imageops::{self, FilterType};
use image::{ImageBuffer, ImageFormat, Luma, Rgb};

use crate::error::{AppError, AppResult, IoContext};

/// File extensions picked up when scanning directories.
pub const IMAGE_EXTENSIONS: [&str; 6] = ["png", "jpg", "jpeg", "bmp", "tif", "tiff"];

pub fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn decode_error(path: &Path, message: impl ToString) -> AppError {
    AppError::Decode {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// Decodes `path` into `channels` (1 or 3) planes in `[0, 1]`, optionally
/// resized to `(height, width)` with a triangle filter.
pub fn load(path: &Path, channels: usize, target: Option<(usize, usize)>) -> AppResult<Image> {
    let bytes = fs::read(path).at(path)?;
    if bytes.is_empty() {
        return Err(decode_error(path, "empty file"));
    }
    let decoded = image::load_from_memory(&bytes).map_err(|e| decode_error(path, e))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let (th, tw) = target.unwrap_or((h, w));
    if th == 0 || tw == 0 {
        return Err(AppError::Validation("resize target must be nonzero".into()));
    }
    let data: Vec<f32> = match channels {
        1 => {
            let mut buf = decoded.to_luma32f();
            if (th, tw) != (h, w) {
                buf = imageops::resize(&buf, tw as u32, th as u32, FilterType::Triangle);
            }
            buf.into_raw()
        }
        3 => {
            let mut buf = decoded.to_rgb32f();
            if (th, tw) != (h, w) {
                buf = imageops::resize(&buf, tw as u32, th as u32, FilterType::Triangle);
            }
            // interleaved RGB to planar
            let raw = buf.into_raw();
            let plane = th * tw;
            let mut planar = vec![0.0f32; raw.len()];
            for (i, px) in raw.chunks_exact(3).enumerate() {
                for c in 0..3 {
                    planar[c * plane + i] = px[c];
                }
            }
            planar
        }
        n => return Err(AppError::Validation(format!("channels must be 1 or 3, got {n}"))),
    };
    let image = Image::new(
        Shape::new(channels, th, tw),
        data.into_iter().map(|v| f64::from(v).clamp(0.0, 1.0)).collect(),
    )?;
    Ok(image)
}

fn quantize(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

/// Writes a lossless 16-bit PNG, creating parent directories as needed.
pub fn save_png(path: &Path, image: &Image) -> AppResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).at(parent)?;
    }
    let (h, w) = (image.height() as u32, image.width() as u32);
    let result = match image.channels() {
        1 => ImageBuffer::<Luma<u16>, _>::from_raw(w, h, image.data().iter().map(|&v| quantize(v)).collect::<Vec<u16>>())
            .expect("buffer length matches shape")
            .save_with_format(path, ImageFormat::Png),
        3 => {
            let plane = image.shape().plane_len();
            let d = image.data();
            let raw: Vec<u16> = (0..plane)
                .flat_map(|i| (0..3).map(move |c| quantize(d[c * plane + i])))
                .collect();
            ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, raw)
                .expect("buffer length matches shape")
                .save_with_format(path, ImageFormat::Png)
        }
        n => return Err(AppError::Validation(format!("cannot encode {n}-channel image as PNG"))),
    };
    result.map_err(|e| decode_error(path, e))
}
