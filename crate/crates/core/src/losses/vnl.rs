use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::geometry::{lift, Point3};
use crate::raster::{is_valid_depth, Raster};

/// Attempts allowed per requested triplet before giving up.
pub const MAX_ATTEMPTS_PER_SAMPLE: usize = 100;

/// Collinearity threshold relative to the product of the two edge lengths.
const COLLINEAR_TOL: f64 = 1e-6;

/// An accepted triplet of pixels and the virtual normals it spans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletSample {
    /// `(x, y)` coordinates of the three pixels.
    pub pixels: [(usize, usize); 3],
    pub pred_normal: Point3,
    pub gt_normal: Point3,
}

fn plane_normal(a: Point3, b: Point3, c: Point3) -> Option<Point3> {
    let e1 = b.sub(a);
    let e2 = c.sub(a);
    let n = e1.cross(e2);
    let len = n.norm();
    if !(len.is_finite() && len >= COLLINEAR_TOL * e1.norm() * e2.norm() && len > 0.0) {
        return None;
    }
    Some(n.scale(1.0 / len))
}

/// Draws up to `n_samples` non-degenerate triplets.
///
/// Pixels are picked uniformly among those where both depths are valid,
/// using a ChaCha8 stream keyed by `seed`. A draw is rejected when either
/// point set is collinear; at most `100 * n_samples` draws are made.
pub fn sample_triplets(
    d_pred: &Raster,
    d_gt: &Raster,
    intr: &CameraIntrinsics,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<TripletSample>> {
    d_pred.ensure_channels("predicted depth", 1)?;
    d_gt.ensure_channels("ground-truth depth", 1)?;
    d_pred.ensure_same_size("predicted vs ground-truth depth", d_gt)?;
    intr.validate()?;
    if n_samples == 0 {
        return Err(Error::InvalidInput(
            "virtual normal loss needs at least one sample".into(),
        ));
    }

    let valid: Vec<(usize, usize)> = (0..d_gt.height())
        .flat_map(|y| (0..d_gt.width()).map(move |x| (x, y)))
        .filter(|&(x, y)| is_valid_depth(d_pred.get(x, y, 0)) && is_valid_depth(d_gt.get(x, y, 0)))
        .collect();
    if valid.len() < 3 {
        return Err(Error::Degenerate(format!(
            "only {} pixels with valid depth, need 3",
            valid.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted = Vec::with_capacity(n_samples);
    for _ in 0..MAX_ATTEMPTS_PER_SAMPLE * n_samples {
        if accepted.len() == n_samples {
            break;
        }
        let pixels = [
            valid[rng.gen_range(0..valid.len())],
            valid[rng.gen_range(0..valid.len())],
            valid[rng.gen_range(0..valid.len())],
        ];
        let normal_of = |d: &Raster| {
            let [a, b, c] = pixels.map(|(x, y)| lift(d, x, y, intr));
            plane_normal(a?, b?, c?)
        };
        if let (Some(pred_normal), Some(gt_normal)) = (normal_of(d_pred), normal_of(d_gt)) {
            accepted.push(TripletSample {
                pixels,
                pred_normal,
                gt_normal,
            });
        }
    }
    if accepted.is_empty() {
        return Err(Error::Degenerate(format!(
            "no non-collinear triplet found in {} attempts",
            MAX_ATTEMPTS_PER_SAMPLE * n_samples
        )));
    }
    Ok(accepted)
}

/// Mean distance between predicted and ground-truth virtual normals over
/// seeded random triplets. See [`sample_triplets`] for the sampler.
pub fn virtual_normal_loss(
    d_pred: &Raster,
    d_gt: &Raster,
    intr: &CameraIntrinsics,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let samples = sample_triplets(d_pred, d_gt, intr, n_samples, seed)?;
    let total: f64 = samples
        .iter()
        .map(|s| s.pred_normal.sub(s.gt_normal).norm())
        .sum();
    Ok(total / samples.len() as f64)
}
