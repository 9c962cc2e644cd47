//! Planar real-valued rasters.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Channel, height and width of a planar raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub const fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub const fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub const fn index(&self, c: usize, h: usize, w: usize) -> usize {
        (c * self.height + h) * self.width + w
    }

    pub(crate) fn expect(&self, other: Shape) -> Result<()> {
        if *self == other {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: *self,
                found: other,
            })
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

/// A C×H×W image stored channel-major, row-major within a channel.
///
/// Values are nominally in `[0, 1]` but only finiteness is enforced, since
/// intermediate results (for example the output of an inverse transform
/// before clamping) can leave that range.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    shape: Shape,
    data: Vec<f64>,
}

impl Image {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::Empty("image with a zero dimension"));
        }
        if data.len() != shape.len() {
            return Err(Error::DataLength {
                shape,
                len: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { shape, data })
    }

    pub fn filled(shape: Shape, value: f64) -> Result<Self> {
        Self::new(shape, vec![value; shape.len()])
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(shape.len());
        for c in 0..shape.channels {
            for h in 0..shape.height {
                for w in 0..shape.width {
                    data.push(f(c, h, w));
                }
            }
        }
        Self::new(shape, data)
    }

    /// Builds an image without validation. Callers guarantee length and finiteness.
    pub(crate) fn from_raw(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), shape.len());
        Self { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, h: usize, w: usize) -> f64 {
        self.data[self.shape.index(c, h, w)]
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.shape.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    /// Copy with every value clamped to `[0, 1]`.
    pub fn clamped(&self) -> Self {
        Self::from_raw(
            self.shape,
            self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        )
    }

    pub fn in_unit_range(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }

    /// Largest absolute element-wise difference. Shapes must match.
    pub fn max_abs_diff(&self, other: &Image) -> Result<f64> {
        self.shape.expect(other.shape)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())))
    }

    /// Euclidean distance between two images of the same shape.
    pub fn l2_distance(&self, other: &Image) -> Result<f64> {
        self.shape.expect(other.shape)?;
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(libm::sqrt(sum))
    }

    /// `height`×`width` window whose top-left corner is `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height() || left + width > self.width() || height == 0 || width == 0
        {
            return Err(Error::Invalid(alloc::format!(
                "crop {height}x{width} at ({top}, {left}) does not fit in {}",
                self.shape
            )));
        }
        let shape = Shape::new(self.channels(), height, width);
        Self::from_fn(shape, |c, h, w| self.get(c, top + h, left + w))
    }

    /// Box-filter downsampling by an integer factor in both directions.
    /// Trailing rows/columns that do not fill a block are dropped.
    pub fn downsample(&self, factor: usize) -> Result<Self> {
        if factor == 0 || factor > self.height() || factor > self.width() {
            return Err(Error::Invalid(alloc::format!(
                "downsample factor {factor} invalid for {}",
                self.shape
            )));
        }
        let shape = Shape::new(self.channels(), self.height() / factor, self.width() / factor);
        let norm = 1.0 / (factor * factor) as f64;
        Self::from_fn(shape, |c, h, w| {
            let mut acc = 0.0;
            for dh in 0..factor {
                for dw in 0..factor {
                    acc += self.get(c, h * factor + dh, w * factor + dw);
                }
            }
            acc * norm
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_bad_length() {
        let s = Shape::new(1, 2, 2);
        assert_eq!(
            Image::new(s, vec![0.0, f64::NAN, 0.0, 0.0]),
            Err(Error::NonFinite { index: 1 })
        );
        assert!(matches!(
            Image::new(s, vec![0.0; 3]),
            Err(Error::DataLength { len: 3, .. })
        ));
        assert!(Image::new(Shape::new(0, 2, 2), vec![]).is_err());
    }

    #[test]
    fn indexing_is_channel_major() {
        let img = Image::from_fn(Shape::new(2, 2, 3), |c, h, w| (c * 100 + h * 10 + w) as f64)
            .unwrap();
        assert_eq!(img.get(1, 1, 2), 112.0);
        assert_eq!(img.plane(1)[0], 100.0);
    }

    #[test]
    fn downsample_averages_blocks() {
        let img = Image::from_fn(Shape::new(1, 4, 4), |_, h, w| (h * 4 + w) as f64).unwrap();
        let d = img.downsample(2).unwrap();
        assert_eq!(d.shape(), Shape::new(1, 2, 2));
        assert_eq!(d.data(), &[2.5, 4.5, 10.5, 12.5]);
    }
}
