//! Pinhole intrinsics and the canonical-focal depth rescaling.
//!
//! Depth predicted in canonical space corresponds to a virtual camera with
//! focal length `f_c`. Converting a real depth map into that space multiplies
//! each valid depth by `f_c / f_eff`, where `f_eff` is the mean of the two
//! focal lengths; converting back divides by the same factor.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::raster::{is_valid_depth, Raster};

/// Default canonical focal length in pixels.
pub const DEFAULT_CANONICAL_FOCAL: f64 = 1000.0;

/// Pinhole camera intrinsics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    /// Focal length in x (pixels).
    pub fx: f64,
    /// Focal length in y (pixels).
    pub fy: f64,
    /// Principal point x (pixels).
    pub cx: f64,
    /// Principal point y (pixels).
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let intr = Self { fx, fy, cx, cy };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx.is_finite() && self.fx > 0.0 && self.fy.is_finite() && self.fy > 0.0) {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be finite and positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::InvalidIntrinsics(format!(
                "principal point must be finite (cx={}, cy={})",
                self.cx, self.cy
            )));
        }
        Ok(())
    }

    /// Mean focal length used for the global canonical scale.
    pub fn effective_focal(&self) -> f64 {
        0.5 * (self.fx + self.fy)
    }
}

/// Canonical camera definition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalSpec {
    pub focal: f64,
}

impl CanonicalSpec {
    pub fn new(focal: f64) -> Result<Self> {
        if !(focal.is_finite() && focal > 0.0) {
            return Err(Error::InvalidInput(format!(
                "canonical focal length must be finite and positive, got {focal}"
            )));
        }
        Ok(Self { focal })
    }
}

impl Default for CanonicalSpec {
    fn default() -> Self {
        Self {
            focal: DEFAULT_CANONICAL_FOCAL,
        }
    }
}

/// Ratio `f_c / f_eff` mapping real depths to canonical depths.
pub fn canonical_scale(intr: &CameraIntrinsics, spec: &CanonicalSpec) -> Result<f64> {
    intr.validate()?;
    if !(spec.focal.is_finite() && spec.focal > 0.0) {
        return Err(Error::InvalidInput(format!(
            "canonical focal length must be finite and positive, got {}",
            spec.focal
        )));
    }
    let s = spec.focal / intr.effective_focal();
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::InvalidIntrinsics(format!(
            "canonical scale {s} is not usable"
        )));
    }
    Ok(s)
}

fn rescale_depth(depth: &Raster, f: impl Fn(f64) -> f64) -> Result<Raster> {
    depth.ensure_channels("depth", 1)?;
    Ok(depth.map(|d| {
        if is_valid_depth(d) {
            f(d as f64) as f32
        } else {
            d
        }
    }))
}

/// Real-space depth to canonical-space depth. Invalid samples pass through.
pub fn to_canonical(
    depth: &Raster,
    intr: &CameraIntrinsics,
    spec: &CanonicalSpec,
) -> Result<Raster> {
    let s = canonical_scale(intr, spec)?;
    rescale_depth(depth, |d| d * s)
}

/// Canonical-space depth back to real-space depth. Invalid samples pass through.
pub fn from_canonical(
    depth: &Raster,
    intr: &CameraIntrinsics,
    spec: &CanonicalSpec,
) -> Result<Raster> {
    let s = canonical_scale(intr, spec)?;
    rescale_depth(depth, |d| d / s)
}

/// Contents of an intrinsics file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntrinsicsFile {
    pub intrinsics: CameraIntrinsics,
    pub canonical: Option<CanonicalSpec>,
}

impl FromStr for IntrinsicsFile {
    type Err = Error;

    /// Parses `key=value` lines (`fx`, `fy`, `cx`, `cy`, optional `f_c`).
    /// Blank lines and `#` comments are ignored.
    fn from_str(text: &str) -> Result<Self> {
        let (mut fx, mut fy, mut cx, mut cy, mut fc) = (None, None, None, None, None);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!(
                    "intrinsics line {}: expected key=value",
                    lineno + 1
                ))
            })?;
            let value: f64 = value.trim().parse().map_err(|_| {
                Error::Parse(format!(
                    "intrinsics line {}: `{}` is not a number",
                    lineno + 1,
                    value.trim()
                ))
            })?;
            let slot = match key.trim() {
                "fx" => &mut fx,
                "fy" => &mut fy,
                "cx" => &mut cx,
                "cy" => &mut cy,
                "f_c" => &mut fc,
                other => {
                    return Err(Error::Parse(format!(
                        "intrinsics line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            };
            *slot = Some(value);
        }
        let need = |v: Option<f64>, k: &str| {
            v.ok_or_else(|| Error::Parse(format!("intrinsics file is missing `{k}`")))
        };
        let intrinsics = CameraIntrinsics::new(
            need(fx, "fx")?,
            need(fy, "fy")?,
            need(cx, "cx")?,
            need(cy, "cy")?,
        )?;
        let canonical = fc.map(CanonicalSpec::new).transpose()?;
        Ok(Self {
            intrinsics,
            canonical,
        })
    }
}

impl IntrinsicsFile {
    pub fn to_text(&self) -> String {
        let i = &self.intrinsics;
        let mut s = format!("fx={}\nfy={}\ncx={}\ncy={}\n", i.fx, i.fy, i.cx, i.cy);
        if let Some(c) = self.canonical {
            s.push_str(&format!("f_c={}\n", c.focal));
        }
        s
    }
}
