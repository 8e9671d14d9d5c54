//! Convolution primitives: stride-1 "same" convolution, the ConvGRU cell and
//! the two-layer projection head.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Square stride-1 convolution with zero padding that preserves spatial size.
///
/// `kernel` is a `k x k` raster with `out * in` channels; channel `o * in + i`
/// holds the taps from input channel `i` to output channel `o`. `bias` is a
/// `1 x 1` raster with `out` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    kernel: Raster,
    bias: Raster,
    in_channels: usize,
    out_channels: usize,
}

impl Conv2d {
    pub fn new(kernel: Raster, bias: Raster) -> Result<Self> {
        if kernel.width() != kernel.height() || kernel.width().is_multiple_of(2) {
            return Err(Error::Shape(format!(
                "kernel must be square with odd size, got {}x{}",
                kernel.width(),
                kernel.height()
            )));
        }
        if bias.width() != 1 || bias.height() != 1 || bias.channels() == 0 {
            return Err(Error::Shape(
                "bias must be a 1x1 raster with at least one channel".into(),
            ));
        }
        let out_channels = bias.channels();
        if !kernel.channels().is_multiple_of(out_channels) || kernel.channels() == 0 {
            return Err(Error::Shape(format!(
                "kernel has {} channels, not a multiple of {out_channels} outputs",
                kernel.channels()
            )));
        }
        Ok(Self {
            in_channels: kernel.channels() / out_channels,
            out_channels,
            kernel,
            bias,
        })
    }

    pub fn zeros(size: usize, in_channels: usize, out_channels: usize) -> Self {
        Self {
            kernel: Raster::zeros(size, size, in_channels * out_channels),
            bias: Raster::zeros(1, 1, out_channels),
            in_channels,
            out_channels,
        }
    }

    /// Weights and biases drawn uniformly from `[-scale, scale]`.
    pub fn random(
        size: usize,
        in_channels: usize,
        out_channels: usize,
        scale: f32,
        rng: &mut impl Rng,
    ) -> Self {
        let dist = Uniform::new_inclusive(-scale, scale);
        let mut conv = Self::zeros(size, in_channels, out_channels);
        for v in conv.kernel.data_mut() {
            *v = dist.sample(rng);
        }
        for v in conv.bias.data_mut() {
            *v = dist.sample(rng);
        }
        conv
    }

    pub fn kernel(&self) -> &Raster {
        &self.kernel
    }

    pub fn bias(&self) -> &Raster {
        &self.bias
    }

    pub fn kernel_mut(&mut self) -> &mut Raster {
        &mut self.kernel
    }

    pub fn bias_mut(&mut self) -> &mut Raster {
        &mut self.bias
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn size(&self) -> usize {
        self.kernel.width()
    }

    #[inline]
    pub fn weight(&self, out: usize, inp: usize, kx: usize, ky: usize) -> f32 {
        self.kernel.get(kx, ky, out * self.in_channels + inp)
    }

    pub fn forward(&self, input: &Raster) -> Result<Raster> {
        input.ensure_channels("convolution input", self.in_channels)?;
        let (w, h) = (input.width() as isize, input.height() as isize);
        let k = self.size() as isize;
        let r = k / 2;
        let mut out = Raster::zeros(input.width(), input.height(), self.out_channels);
        let mut acc = vec![0.0f64; self.out_channels];
        for y in 0..h {
            for x in 0..w {
                for (o, a) in acc.iter_mut().enumerate() {
                    *a = self.bias.data()[o] as f64;
                }
                for ky in 0..k {
                    let sy = y + ky - r;
                    if sy < 0 || sy >= h {
                        continue;
                    }
                    for kx in 0..k {
                        let sx = x + kx - r;
                        if sx < 0 || sx >= w {
                            continue;
                        }
                        let px = input.pixel(sx as usize, sy as usize);
                        let taps = self.kernel.pixel(kx as usize, ky as usize);
                        for (o, a) in acc.iter_mut().enumerate() {
                            let row = &taps[o * self.in_channels..(o + 1) * self.in_channels];
                            *a += row
                                .iter()
                                .zip(px)
                                .map(|(&wt, &v)| wt as f64 * v as f64)
                                .sum::<f64>();
                        }
                    }
                }
                for (dst, &a) in out.pixel_mut(x as usize, y as usize).iter_mut().zip(&acc) {
                    *dst = a as f32;
                }
            }
        }
        Ok(out)
    }
}

#[inline]
fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Convolutional GRU cell with 3x3 gates.
///
/// ```text
/// z  = sigmoid(conv_z([h, x]))
/// r  = sigmoid(conv_r([h, x]))
/// h~ = tanh(conv_h([r * h, x]))
/// h' = (1 - z) * h + z * h~
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGru {
    pub update: Conv2d,
    pub reset: Conv2d,
    pub candidate: Conv2d,
}

impl ConvGru {
    pub fn new(update: Conv2d, reset: Conv2d, candidate: Conv2d) -> Result<Self> {
        let hidden = update.out_channels();
        let in_all = update.in_channels();
        for (name, c) in [("reset", &reset), ("candidate", &candidate)] {
            if c.out_channels() != hidden || c.in_channels() != in_all || c.size() != update.size()
            {
                return Err(Error::Shape(format!(
                    "ConvGRU {name} gate is {}->{} ({}x{}), update gate is {in_all}->{hidden}",
                    c.in_channels(),
                    c.out_channels(),
                    c.size(),
                    c.size()
                )));
            }
        }
        if in_all <= hidden {
            return Err(Error::Shape(
                "ConvGRU gates need input channels beyond the hidden state".into(),
            ));
        }
        Ok(Self {
            update,
            reset,
            candidate,
        })
    }

    pub fn random(hidden: usize, input: usize, scale: f32, rng: &mut impl Rng) -> Self {
        Self {
            update: Conv2d::random(3, hidden + input, hidden, scale, rng),
            reset: Conv2d::random(3, hidden + input, hidden, scale, rng),
            candidate: Conv2d::random(3, hidden + input, hidden, scale, rng),
        }
    }

    pub fn hidden_channels(&self) -> usize {
        self.update.out_channels()
    }

    pub fn input_channels(&self) -> usize {
        self.update.in_channels() - self.hidden_channels()
    }

    pub fn step(&self, h: &Raster, x: &Raster) -> Result<Raster> {
        h.ensure_channels("hidden state", self.hidden_channels())?;
        x.ensure_channels("ConvGRU input", self.input_channels())?;
        h.ensure_same_size("hidden state vs ConvGRU input", x)?;
        let hx = Raster::concat(&[h, x])?;
        let z = self.update.forward(&hx)?;
        let r = self.reset.forward(&hx)?;
        let mut rh = h.clone();
        for (v, &g) in rh.data_mut().iter_mut().zip(r.data()) {
            *v = (sigmoid(g as f64) * *v as f64) as f32;
        }
        let q = self.candidate.forward(&Raster::concat(&[&rh, x])?)?;
        let mut out = h.clone();
        for ((v, &zg), &qv) in out.data_mut().iter_mut().zip(z.data()).zip(q.data()) {
            let z = sigmoid(zg as f64);
            *v = ((1.0 - z) * *v as f64 + z * (qv as f64).tanh()) as f32;
        }
        Ok(out)
    }
}

/// 3x3 convolution, ReLU, then 1x1 convolution to the output channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
}

impl ProjectionHead {
    pub fn new(conv1: Conv2d, conv2: Conv2d) -> Result<Self> {
        if conv1.size() != 3 || conv2.size() != 1 {
            return Err(Error::Shape(format!(
                "projection head needs 3x3 then 1x1 kernels, got {0}x{0} then {1}x{1}",
                conv1.size(),
                conv2.size()
            )));
        }
        if conv1.out_channels() != conv2.in_channels() {
            return Err(Error::Shape(format!(
                "projection head layers disagree: {} vs {} channels",
                conv1.out_channels(),
                conv2.in_channels()
            )));
        }
        Ok(Self { conv1, conv2 })
    }

    pub fn zeros(hidden: usize, out: usize) -> Self {
        Self {
            conv1: Conv2d::zeros(3, hidden, hidden),
            conv2: Conv2d::zeros(1, hidden, out),
        }
    }

    pub fn random(hidden: usize, out: usize, scale: f32, rng: &mut impl Rng) -> Self {
        Self {
            conv1: Conv2d::random(3, hidden, hidden, scale, rng),
            conv2: Conv2d::random(1, hidden, out, scale, rng),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.conv1.in_channels()
    }

    pub fn out_channels(&self) -> usize {
        self.conv2.out_channels()
    }

    pub fn forward(&self, h: &Raster) -> Result<Raster> {
        let mid = self.conv1.forward(h)?.map(|v| v.max(0.0));
        self.conv2.forward(&mid)
    }
}
