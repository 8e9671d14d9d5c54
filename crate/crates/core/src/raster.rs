//! Dense `f32` rasters with interleaved channels.

use crate::error::{Error, Result};

/// Returns `true` for a usable depth sample: finite and strictly positive.
#[inline]
pub fn is_valid_depth(d: f32) -> bool {
    d.is_finite() && d > 0.0
}

/// A `width x height x channels` grid of 32-bit floats, row-major with
/// channels interleaved per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Raster {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or(Error::DimensionOverflow {
                width,
                height,
                channels,
            })?;
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "{width}x{height}x{channels} raster needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds a raster by evaluating `f(x, y, c)` for every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self {
            width,
            height,
            channels,
            data,
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

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f32) {
        let i = self.index(x, y, c);
        self.data[i] = value;
    }

    /// All channels of one pixel.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let start = (y * self.width + x) * self.channels;
        &mut self.data[start..start + self.channels]
    }

    pub fn same_size(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn same_shape(&self, other: &Raster) -> bool {
        self.same_size(other) && self.channels == other.channels
    }

    pub fn ensure_channels(&self, what: &str, channels: usize) -> Result<()> {
        if self.channels != channels {
            return Err(Error::Shape(format!(
                "{what} must have {channels} channel(s), found {}",
                self.channels
            )));
        }
        Ok(())
    }

    pub fn ensure_same_size(&self, what: &str, other: &Raster) -> Result<()> {
        if !self.same_size(other) {
            return Err(Error::Shape(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    pub fn is_all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, mut f: impl FnMut(f32) -> f32) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Extracts a contiguous channel range as a new raster.
    pub fn channel_slice(&self, start: usize, count: usize) -> Result<Raster> {
        if start + count > self.channels {
            return Err(Error::Shape(format!(
                "channels {start}..{} out of range for {}-channel raster",
                start + count,
                self.channels
            )));
        }
        let mut out = Vec::with_capacity(self.width * self.height * count);
        for px in self.data.chunks_exact(self.channels) {
            out.extend_from_slice(&px[start..start + count]);
        }
        Raster::from_vec(self.width, self.height, count, out)
    }

    /// Channel-wise concatenation of rasters sharing one spatial size.
    pub fn concat(parts: &[&Raster]) -> Result<Raster> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidInput("nothing to concatenate".into()))?;
        for p in parts {
            first.ensure_same_size("concatenation", p)?;
        }
        let channels: usize = parts.iter().map(|p| p.channels).sum();
        let mut data = Vec::with_capacity(first.width * first.height * channels);
        for i in 0..first.width * first.height {
            for p in parts {
                data.extend_from_slice(&p.data[i * p.channels..(i + 1) * p.channels]);
            }
        }
        Raster::from_vec(first.width, first.height, channels, data)
    }

    /// Bilinear resampling with half-pixel centres (no corner alignment).
    /// Source coordinates are clamped at the borders.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Raster {
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut out = Raster::zeros(width, height, self.channels);
        for y in 0..height {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let wy = fy - y0 as f64;
            for x in 0..width {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let wx = fx - x0 as f64;
                for c in 0..self.channels {
                    let top =
                        self.get(x0, y0, c) as f64 * (1.0 - wx) + self.get(x1, y0, c) as f64 * wx;
                    let bot =
                        self.get(x0, y1, c) as f64 * (1.0 - wx) + self.get(x1, y1, c) as f64 * wx;
                    out.set(x, y, c, (top * (1.0 - wy) + bot * wy) as f32);
                }
            }
        }
        out
    }

    /// Nearest-neighbour resampling: destination pixel `x` reads source
    /// pixel `floor(x * src_width / dst_width)`.
    pub fn resize_nearest(&self, width: usize, height: usize) -> Raster {
        let mut out = Raster::zeros(width, height, self.channels);
        for y in 0..height {
            let src_y = y * self.height / height;
            for x in 0..width {
                let src_x = x * self.width / width;
                out.pixel_mut(x, y)
                    .copy_from_slice(self.pixel(src_x, src_y));
            }
        }
        out
    }
}
