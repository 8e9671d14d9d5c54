//! Per-pixel label grids: the safe/unsafe class mask and a plain validity mask.

use crate::error::{Error, Result};
use crate::raster::{is_valid_depth, Raster};

/// Class label of a safe (landable) pixel.
pub const SAFE: u8 = 0;
/// Class label of an unsafe pixel.
pub const UNSAFE: u8 = 1;

/// Binary segmentation mask: `0` marks a safe pixel, `1` an unsafe one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, fill: u8) -> Self {
        debug_assert!(fill <= 1);
        Self {
            width,
            height,
            labels: vec![fill; width * height],
        }
    }

    pub fn all_safe(width: usize, height: usize) -> Self {
        Self::new(width, height, SAFE)
    }

    pub fn all_unsafe(width: usize, height: usize) -> Self {
        Self::new(width, height, UNSAFE)
    }

    pub fn from_labels(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::Shape(format!(
                "{width}x{height} mask needs {} labels, got {}",
                width * height,
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > UNSAFE) {
            return Err(Error::InvalidInput(format!(
                "mask label {bad} is not 0 or 1"
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                labels.push(if f(x, y) == SAFE { SAFE } else { UNSAFE });
            }
        }
        Self {
            width,
            height,
            labels,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, label: u8) {
        debug_assert!(label <= 1);
        self.labels[y * self.width + x] = label;
    }

    #[inline]
    pub fn is_safe(&self, x: usize, y: usize) -> bool {
        self.get(x, y) == SAFE
    }

    pub fn safe_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == SAFE).count()
    }

    pub fn same_size(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }

    pub fn ensure_size(&self, what: &str, width: usize, height: usize) -> Result<()> {
        if !self.same_size(width, height) {
            return Err(Error::Shape(format!(
                "{what}: mask is {}x{}, expected {width}x{height}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    /// Swaps safe and unsafe.
    pub fn inverted(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            labels: self.labels.iter().map(|&l| 1 - l).collect(),
        }
    }
}

/// Marks which pixels take part in a loss.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidMask {
    width: usize,
    height: usize,
    valid: Vec<bool>,
}

impl ValidMask {
    pub fn all(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            valid: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut valid = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                valid.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            valid,
        }
    }

    /// Pixels holding a valid depth in the first channel.
    pub fn from_depth(depth: &Raster) -> Self {
        Self::from_fn(depth.width(), depth.height(), |x, y| {
            is_valid_depth(depth.get(x, y, 0))
        })
    }

    /// Safe pixels of a class mask count as valid.
    pub fn from_safe(mask: &BinaryMask) -> Self {
        Self::from_fn(mask.width(), mask.height(), |x, y| mask.is_safe(x, y))
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.valid
    }

    pub fn count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn ensure_size(&self, what: &str, width: usize, height: usize) -> Result<()> {
        if self.width != width || self.height != height {
            return Err(Error::Shape(format!(
                "{what}: valid mask is {}x{}, expected {width}x{height}",
                self.width, self.height
            )));
        }
        Ok(())
    }
}
