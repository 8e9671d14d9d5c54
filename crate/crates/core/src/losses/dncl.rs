use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::geometry::{
    normals_from_depth, pixel_ray, tangent_cross, tangent_stencil, NormalRaster, Point3,
};
use crate::raster::Raster;

fn check(d_pred: &Raster, n_pred: &NormalRaster) -> Result<()> {
    d_pred.ensure_channels("predicted depth", 1)?;
    d_pred.ensure_same_size("depth vs predicted normals", n_pred.raster())
}

/// `(1/M) * sum (1 - n_depth · n_pred)` over the `M` pixels where both the
/// depth-derived normal and the predicted normal are defined.
///
/// Predicted normals are used as given; the `[0, 2]` range assumes unit vectors.
pub fn depth_normal_consistency(
    d_pred: &Raster,
    n_pred: &NormalRaster,
    intr: &CameraIntrinsics,
) -> Result<f64> {
    check(d_pred, n_pred)?;
    let derived = normals_from_depth(d_pred, intr)?;
    let mut sum = 0.0;
    let mut m = 0usize;
    for y in 0..d_pred.height() {
        for x in 0..d_pred.width() {
            if let (Some(a), Some(b)) = (derived.normal(x, y), n_pred.normal(x, y)) {
                sum += 1.0 - a.dot(b);
                m += 1;
            }
        }
    }
    if m == 0 {
        return Err(Error::Degenerate(
            "no pixel with both normals defined".into(),
        ));
    }
    Ok(sum / m as f64)
}

/// [`depth_normal_consistency`] and its gradient with respect to `d_pred`.
///
/// The derived normal is evaluated in `f64` directly from the depth samples,
/// so the returned value can differ from [`depth_normal_consistency`] (which
/// goes through an `f32` normal raster) by rounding only.
pub fn depth_normal_consistency_grad(
    d_pred: &Raster,
    n_pred: &NormalRaster,
    intr: &CameraIntrinsics,
) -> Result<(f64, Raster)> {
    check(d_pred, n_pred)?;
    // size and intrinsics checks
    normals_from_depth(d_pred, intr)?;
    let (w, h) = (d_pred.width(), d_pred.height());

    // gradient with respect to each backprojected point
    let mut grad_p = vec![Point3::default(); w * h];
    let mut sum = 0.0;
    let mut m = 0usize;
    for y in 0..h {
        for x in 0..w {
            let Some(target) = n_pred.normal(x, y) else {
                continue;
            };
            let Some(c) = tangent_cross(d_pred, x, y, intr) else {
                continue;
            };
            let len = c.norm();
            if !(len.is_finite() && len > 0.0) {
                continue;
            }
            let sign = if c.z > 0.0 { -1.0 } else { 1.0 };
            let unit = c.scale(1.0 / len);
            sum += 1.0 - sign * unit.dot(target);
            m += 1;

            // d(1 - s c/|c| . N)/dc = -s (N - c_hat (c_hat . N)) / |c|
            let g = target.sub(unit.scale(unit.dot(target))).scale(-sign / len);
            let ((xl, xh), (yl, yh)) = tangent_stencil(x, y, w, h);
            let lift = |px: usize, py: usize| {
                crate::geometry::lift(d_pred, px, py, intr).expect("validated by tangent_cross")
            };
            let tx = lift(xh, y).sub(lift(xl, y));
            let ty = lift(x, yh).sub(lift(x, yl));
            let g_tx = ty.cross(g);
            let g_ty = g.cross(tx);
            grad_p[y * w + xh] = grad_p[y * w + xh].add(g_tx);
            grad_p[y * w + xl] = grad_p[y * w + xl].sub(g_tx);
            grad_p[yh * w + x] = grad_p[yh * w + x].add(g_ty);
            grad_p[yl * w + x] = grad_p[yl * w + x].sub(g_ty);
        }
    }
    if m == 0 {
        return Err(Error::Degenerate(
            "no pixel with both normals defined".into(),
        ));
    }
    let inv_m = 1.0 / m as f64;
    let grad = Raster::from_fn(w, h, 1, |x, y, _| {
        let ray = pixel_ray(x as f64, y as f64, intr);
        (grad_p[y * w + x].dot(ray) * inv_m) as f32
    });
    Ok((sum * inv_m, grad))
}
