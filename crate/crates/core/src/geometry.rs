//! Backprojection, normals from depth, and tilt-corrected area integration.
//!
//! Pixel `(u, v)` refers to the centre of column `u`, row `v`. The camera
//! looks along `+Z` with `+Y` pointing down the image, so surfaces seen by
//! the camera have normals with a non-positive `z` component.

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::raster::{is_valid_depth, Raster};

/// Default lower bound on `|n_z|` below which a pixel is left out of area sums.
pub const DEFAULT_NZ_MIN: f64 = 0.1;

/// Point in the camera frame, metres.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    #[inline]
    pub fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    #[inline]
    pub fn scale(self, k: f64) -> Point3 {
        Point3::new(self.x * k, self.y * k, self.z * k)
    }

    #[inline]
    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Viewing ray through pixel `(u, v)` scaled so that its `z` component is 1.
#[inline]
pub fn pixel_ray(u: f64, v: f64, intr: &CameraIntrinsics) -> Point3 {
    Point3::new((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0)
}

/// Lifts pixel `(u, v)` with depth `d` (the `Z` coordinate) into the camera frame.
pub fn backproject(u: f64, v: f64, d: f64, intr: &CameraIntrinsics) -> Result<Point3> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::InvalidInput(format!(
            "depth {d} is not a valid depth"
        )));
    }
    Ok(Point3::new(
        (u - intr.cx) * d / intr.fx,
        (v - intr.cy) * d / intr.fy,
        d,
    ))
}

/// Perspective projection, the inverse of [`backproject`]: returns `(u, v, d)`.
pub fn project(p: Point3, intr: &CameraIntrinsics) -> Result<(f64, f64, f64)> {
    if !(p.z.is_finite() && p.z > 0.0) {
        return Err(Error::InvalidInput(format!(
            "point behind camera (z={})",
            p.z
        )));
    }
    Ok((
        intr.fx * p.x / p.z + intr.cx,
        intr.fy * p.y / p.z + intr.cy,
        p.z,
    ))
}

/// Three-channel raster of unit normals. Invalid pixels hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalRaster(Raster);

impl NormalRaster {
    pub fn from_raster(raster: Raster) -> Result<Self> {
        raster.ensure_channels("normal raster", 3)?;
        Ok(Self(raster))
    }

    pub fn raster(&self) -> &Raster {
        &self.0
    }

    pub fn into_raster(self) -> Raster {
        self.0
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    /// Normal at a pixel, or `None` when any component is non-finite.
    pub fn normal(&self, x: usize, y: usize) -> Option<Point3> {
        let px = self.0.pixel(x, y);
        let n = Point3::new(px[0] as f64, px[1] as f64, px[2] as f64);
        n.is_finite().then_some(n)
    }

    /// Every component negated.
    pub fn negated(&self) -> Self {
        Self(self.0.map(|v| -v))
    }
}

/// Neighbour pairs used for the tangent at `(x, y)`: central differences in
/// the interior, one-sided at the borders. Returns `((x_lo, x_hi), (y_lo, y_hi))`.
#[inline]
pub(crate) fn tangent_stencil(
    x: usize,
    y: usize,
    width: usize,
    height: usize,
) -> ((usize, usize), (usize, usize)) {
    let along = |i: usize, n: usize| {
        if i == 0 {
            (0, 1)
        } else if i + 1 == n {
            (i - 1, i)
        } else {
            (i - 1, i + 1)
        }
    };
    (along(x, width), along(y, height))
}

/// Backprojected point of a raster sample, or `None` for invalid depth.
#[inline]
pub(crate) fn lift(depth: &Raster, x: usize, y: usize, intr: &CameraIntrinsics) -> Option<Point3> {
    let d = depth.get(x, y, 0);
    if !is_valid_depth(d) {
        return None;
    }
    let d = d as f64;
    Some(Point3::new(
        (x as f64 - intr.cx) * d / intr.fx,
        (y as f64 - intr.cy) * d / intr.fy,
        d,
    ))
}

/// Unnormalised cross product of the two tangents at `(x, y)`, or `None`
/// when the pixel or any stencil neighbour has invalid depth.
pub(crate) fn tangent_cross(
    depth: &Raster,
    x: usize,
    y: usize,
    intr: &CameraIntrinsics,
) -> Option<Point3> {
    lift(depth, x, y, intr)?;
    let ((xl, xh), (yl, yh)) = tangent_stencil(x, y, depth.width(), depth.height());
    let tx = lift(depth, xh, y, intr)?.sub(lift(depth, xl, y, intr)?);
    let ty = lift(depth, x, yh, intr)?.sub(lift(depth, x, yl, intr)?);
    Some(tx.cross(ty))
}

/// Estimates per-pixel surface normals from a depth map.
///
/// Tangents come from finite differences of backprojected neighbours; the
/// normal is their normalised cross product, flipped to face the camera.
pub fn normals_from_depth(depth: &Raster, intr: &CameraIntrinsics) -> Result<NormalRaster> {
    depth.ensure_channels("depth", 1)?;
    intr.validate()?;
    let (w, h) = (depth.width(), depth.height());
    if w < 3 || h < 3 {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min: 3,
        });
    }
    let mut out = Raster::filled(w, h, 3, f32::NAN);
    for y in 0..h {
        for x in 0..w {
            let Some(c) = tangent_cross(depth, x, y, intr) else {
                continue;
            };
            let len = c.norm();
            if !(len.is_finite() && len > 0.0) {
                continue;
            }
            let sign = if c.z > 0.0 { -1.0 } else { 1.0 };
            let n = c.scale(sign / len);
            out.pixel_mut(x, y)
                .copy_from_slice(&[n.x as f32, n.y as f32, n.z as f32]);
        }
    }
    Ok(NormalRaster(out))
}

/// Outcome of the per-pixel area formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PixelArea {
    /// Ground area covered by the pixel, m².
    Included(f64),
    /// Surface too steep (`|n_z| < n_z_min`) or normal unusable.
    Excluded,
}

/// Tilt-corrected footprint `d² / (fx·fy·|n_z|)` of one pixel.
pub fn pixel_area(d: f64, n_z: f64, intr: &CameraIntrinsics, n_z_min: f64) -> Result<PixelArea> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::InvalidInput(format!(
            "depth {d} is not a valid depth"
        )));
    }
    let nz = n_z.abs();
    if !nz.is_finite() || nz < n_z_min || nz == 0.0 {
        return Ok(PixelArea::Excluded);
    }
    Ok(PixelArea::Included(d * d / (intr.fx * intr.fy * nz)))
}

/// Area summary of one region.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AreaReport {
    /// Sum of the included pixel footprints, m².
    pub total_area: f64,
    /// Pixels contributing to `total_area`.
    pub pixel_count: usize,
    /// Safe pixels skipped for invalid depth, invalid normal or steepness.
    pub excluded_count: usize,
}

/// Sums pixel footprints over the safe pixels of `region`.
///
/// `region` holds `(x, y)` pixel coordinates; pixels that are unsafe in
/// `mask` are ignored. The sum runs in row-major order regardless of the
/// order of `region`, so results are bitwise reproducible.
pub fn region_area(
    mask: &BinaryMask,
    region: &[(usize, usize)],
    depth: &Raster,
    normals: &NormalRaster,
    intr: &CameraIntrinsics,
    n_z_min: f64,
) -> Result<AreaReport> {
    depth.ensure_channels("depth", 1)?;
    depth.ensure_same_size("depth vs normals", normals.raster())?;
    mask.ensure_size("area mask", depth.width(), depth.height())?;
    intr.validate()?;

    let mut pixels: Vec<(usize, usize)> = region.to_vec();
    if let Some(&(x, y)) = pixels
        .iter()
        .find(|&&(x, y)| x >= depth.width() || y >= depth.height())
    {
        return Err(Error::Shape(format!(
            "region pixel ({x}, {y}) outside {}x{} raster",
            depth.width(),
            depth.height()
        )));
    }
    pixels.sort_unstable_by_key(|&(x, y)| (y, x));
    pixels.dedup();

    let mut report = AreaReport::default();
    for (x, y) in pixels {
        if !mask.is_safe(x, y) {
            continue;
        }
        let d = depth.get(x, y, 0);
        let Some(n) = normals.normal(x, y).filter(|_| is_valid_depth(d)) else {
            report.excluded_count += 1;
            continue;
        };
        match pixel_area(d as f64, n.z, intr, n_z_min)? {
            PixelArea::Included(a) => {
                report.total_area += a;
                report.pixel_count += 1;
            }
            PixelArea::Excluded => report.excluded_count += 1,
        }
    }
    Ok(report)
}

/// Area of every safe pixel in `mask`.
pub fn safe_area(
    mask: &BinaryMask,
    depth: &Raster,
    normals: &NormalRaster,
    intr: &CameraIntrinsics,
    n_z_min: f64,
) -> Result<AreaReport> {
    let region: Vec<(usize, usize)> = (0..mask.height())
        .flat_map(|y| (0..mask.width()).map(move |x| (x, y)))
        .filter(|&(x, y)| mask.is_safe(x, y))
        .collect();
    region_area(mask, &region, depth, normals, intr, n_z_min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam(f: f64, c: f64) -> CameraIntrinsics {
        CameraIntrinsics::new(f, f, c, c).unwrap()
    }

    #[test]
    fn backproject_examples() {
        let i = cam(100.0, 50.0);
        assert_eq!(
            backproject(50.0, 50.0, 5.0, &i).unwrap(),
            Point3::new(0.0, 0.0, 5.0)
        );
        assert_eq!(
            backproject(150.0, 50.0, 2.0, &i).unwrap(),
            Point3::new(2.0, 0.0, 2.0)
        );
        assert!(backproject(1.0, 1.0, 0.0, &i).is_err());
        assert!(backproject(1.0, 1.0, f64::NAN, &i).is_err());
    }

    #[test]
    fn fronto_parallel_normals() {
        let i = cam(100.0, 3.5);
        let d = Raster::filled(8, 8, 1, 10.0);
        let n = normals_from_depth(&d, &i).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                let v = n.normal(x, y).unwrap();
                assert!(v.x.abs() <= 1e-5 && v.y.abs() <= 1e-5 && (v.z + 1.0).abs() <= 1e-5);
            }
        }
    }

    #[test]
    fn too_small_raster() {
        let i = cam(100.0, 1.0);
        assert!(matches!(
            normals_from_depth(&Raster::filled(2, 2, 1, 1.0), &i),
            Err(Error::TooSmall { .. })
        ));
        assert!(normals_from_depth(&Raster::filled(3, 3, 1, 1.0), &i).is_ok());
    }

    #[test]
    fn invalid_neighbour_invalidates() {
        let i = cam(100.0, 2.0);
        let mut d = Raster::filled(5, 5, 1, 4.0);
        d.set(2, 2, 0, 0.0);
        let n = normals_from_depth(&d, &i).unwrap();
        assert!(n.normal(2, 2).is_none());
        assert!(n.normal(1, 2).is_none());
        assert!(n.normal(2, 3).is_none());
        // (1, 1) uses (0,1), (2,1), (1,0), (1,2): all valid
        assert!(n.normal(1, 1).is_some());
    }

    #[test]
    fn pixel_area_examples() {
        let i = cam(100.0, 0.0);
        assert_eq!(
            pixel_area(2.0, -1.0, &i, DEFAULT_NZ_MIN).unwrap(),
            PixelArea::Included(4e-4)
        );
        let (PixelArea::Included(a1), PixelArea::Included(a2)) = (
            pixel_area(3.0, -1.0, &i, DEFAULT_NZ_MIN).unwrap(),
            pixel_area(3.0, -0.5, &i, DEFAULT_NZ_MIN).unwrap(),
        ) else {
            panic!("both included");
        };
        assert_eq!(a2, 2.0 * a1);
        assert_eq!(
            pixel_area(2.0, 0.0, &i, DEFAULT_NZ_MIN).unwrap(),
            PixelArea::Excluded
        );
        assert_eq!(pixel_area(2.0, 0.0, &i, 0.0).unwrap(), PixelArea::Excluded);
        assert_eq!(
            pixel_area(2.0, -0.05, &i, DEFAULT_NZ_MIN).unwrap(),
            PixelArea::Excluded
        );
        assert!(pixel_area(-2.0, 1.0, &i, DEFAULT_NZ_MIN).is_err());
    }

    #[test]
    fn empty_region_is_zero() {
        let i = cam(100.0, 2.0);
        let d = Raster::filled(4, 4, 1, 3.0);
        let n = normals_from_depth(&d, &i).unwrap();
        let mask = BinaryMask::all_safe(4, 4);
        let r = region_area(&mask, &[], &d, &n, &i, DEFAULT_NZ_MIN).unwrap();
        assert_eq!(r, AreaReport::default());
    }

    #[test]
    fn region_area_shape_errors() {
        let i = cam(100.0, 2.0);
        let d = Raster::filled(4, 4, 1, 3.0);
        let n = normals_from_depth(&Raster::filled(5, 4, 1, 3.0), &i).unwrap();
        let mask = BinaryMask::all_safe(4, 4);
        assert!(matches!(
            region_area(&mask, &[(0, 0)], &d, &n, &i, 0.1),
            Err(Error::Shape(_))
        ));
        let n = normals_from_depth(&d, &i).unwrap();
        assert!(matches!(
            region_area(&mask, &[(9, 0)], &d, &n, &i, 0.1),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            region_area(&BinaryMask::all_safe(3, 3), &[(0, 0)], &d, &n, &i, 0.1),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn unsafe_and_invalid_pixels() {
        let i = cam(64.0, 2.0);
        let mut d = Raster::filled(4, 4, 1, 2.0);
        let n = normals_from_depth(&d, &i).unwrap();
        d.set(0, 0, 0, f32::NAN);
        let mut mask = BinaryMask::all_safe(4, 4);
        mask.set(3, 3, 1);
        let r = safe_area(&mask, &d, &n, &i, DEFAULT_NZ_MIN).unwrap();
        assert_eq!(r.pixel_count, 14);
        assert_eq!(r.excluded_count, 1);
        assert_eq!(r.total_area, 14.0 * 4.0 / (64.0 * 64.0));
    }
}
