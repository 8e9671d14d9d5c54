//! Synthetic scenes with known geometry: a tilted ground plane, box
//! obstacles standing on it and an optional measurement patch.
//!
//! Scene files are `key=value` lines. Top-level keys come first (`width`,
//! `height`, `fx`, `fy`, optional `cx`, `cy`, `buffer`), followed by one
//! `[plane]` section (`distance`, `pitch_deg`, `roll_deg`), any number of
//! `[box]` sections (`u0`, `u1`, `v0`, `v1`, `height`) and at most one
//! `[patch]` section (`x0`, `x1`, `y0`, `y1`).
//!
//! The plane passes through `(0, 0, distance)`. Its frame is the camera
//! frame rotated by `Ry(roll) * Rx(pitch)`: plane axes `e_u`, `e_v` are the
//! rotated `x`, `y` axes and the up normal is the rotated `-z` axis, which
//! faces the camera. Boxes are given in plane coordinates `(u, v)` and rise
//! `height` along the up normal. The patch is a rectangle of camera `X`, `Y`
//! coordinates lifted onto the plane.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::geometry::{pixel_ray, NormalRaster, Point3};
use crate::mask::{BinaryMask, SAFE};
use crate::raster::Raster;
use crate::slz::dilate_unsafe;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneSpec {
    pub distance: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSpec {
    pub u0: f64,
    pub u1: f64,
    pub v0: f64,
    pub v1: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchSpec {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub intrinsics: CameraIntrinsics,
    /// Dilation radius applied to the unsafe set of the rendered mask.
    pub buffer: usize,
    pub plane: PlaneSpec,
    pub boxes: Vec<BoxSpec>,
    pub patch: Option<PatchSpec>,
}

/// Plane frame in camera coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFrame {
    pub origin: Point3,
    pub e_u: Point3,
    pub e_v: Point3,
    /// Unit normal facing the camera.
    pub up: Point3,
}

impl PlaneSpec {
    pub fn frame(&self) -> PlaneFrame {
        let (sp, cp) = self.pitch_deg.to_radians().sin_cos();
        let (sr, cr) = self.roll_deg.to_radians().sin_cos();
        // columns of Ry(roll) * Rx(pitch)
        let e_u = Point3::new(cr, 0.0, -sr);
        let e_v = Point3::new(sr * sp, cp, cr * sp);
        let e_w = Point3::new(sr * cp, -sp, cr * cp);
        PlaneFrame {
            origin: Point3::new(0.0, 0.0, self.distance),
            e_u,
            e_v,
            up: e_w.scale(-1.0),
        }
    }

    /// Angle between the plane normal and the optical axis, degrees.
    pub fn tilt_deg(&self) -> f64 {
        self.frame().up.z.abs().min(1.0).acos().to_degrees()
    }
}

impl PlaneFrame {
    /// Depth along the pixel ray `r` (with `r.z == 1`) where it meets the plane.
    fn hit(&self, r: Point3) -> Option<f64> {
        let den = self.up.dot(r);
        let t = self.up.dot(self.origin) / den;
        (den != 0.0 && t.is_finite() && t > 0.0).then_some(t)
    }

    fn local(&self, p: Point3) -> Point3 {
        let q = p.sub(self.origin);
        Point3::new(self.e_u.dot(q), self.e_v.dot(q), self.up.dot(q))
    }
}

impl BoxSpec {
    /// Slab test of the ray `t * r` against the box. Returns the entry depth
    /// and the outward face normal in camera coordinates.
    fn hit(&self, frame: &PlaneFrame, r: Point3) -> Option<(f64, Point3)> {
        let o = frame.local(Point3::new(0.0, 0.0, 0.0));
        let d = Point3::new(frame.e_u.dot(r), frame.e_v.dot(r), frame.up.dot(r));
        let slabs = [
            (o.x, d.x, self.u0, self.u1, frame.e_u),
            (o.y, d.y, self.v0, self.v1, frame.e_v),
            (o.z, d.z, 0.0, self.height, frame.up),
        ];
        let (mut t_in, mut t_out) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut face = frame.up;
        for (o, d, lo, hi, axis) in slabs {
            if d == 0.0 {
                if o < lo || o > hi {
                    return None;
                }
                continue;
            }
            let (ta, tb) = ((lo - o) / d, (hi - o) / d);
            let (near, normal) = if ta < tb {
                (ta, axis.scale(-1.0))
            } else {
                (tb, axis)
            };
            if near > t_in {
                t_in = near;
                face = normal;
            }
            t_out = t_out.min(ta.max(tb));
        }
        (t_in <= t_out && t_in > 0.0).then_some((t_in, face))
    }

    pub fn footprint_area(&self) -> f64 {
        (self.u1 - self.u0) * (self.v1 - self.v0)
    }
}

impl PatchSpec {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    /// Area of the rectangle in the camera `XY` plane.
    pub fn xy_area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

fn num(section: &str, key: &str, value: &str, lineno: usize) -> Result<f64> {
    let v: f64 = value.parse().map_err(|_| {
        Error::Parse(format!(
            "scene line {lineno}: {section}.{key} = `{value}` is not a number"
        ))
    })?;
    if !v.is_finite() {
        return Err(Error::Parse(format!(
            "scene line {lineno}: {section}.{key} must be finite"
        )));
    }
    Ok(v)
}

fn take(map: &mut BTreeMap<String, f64>, section: &str, key: &str) -> Result<f64> {
    map.remove(key)
        .ok_or_else(|| Error::Parse(format!("scene [{section}] is missing `{key}`")))
}

fn take_or(map: &mut BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    map.remove(key).unwrap_or(default)
}

fn no_leftovers(map: BTreeMap<String, f64>, section: &str) -> Result<()> {
    match map.keys().next() {
        Some(k) => Err(Error::Parse(format!(
            "scene [{section}] has unknown key `{k}`"
        ))),
        None => Ok(()),
    }
}

fn dimension(v: f64, key: &str) -> Result<usize> {
    if v < 1.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(Error::Parse(format!(
            "scene `{key}` must be a positive integer, found {v}"
        )));
    }
    Ok(v as usize)
}

impl FromStr for SceneSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut sections: Vec<(String, BTreeMap<String, f64>)> =
            vec![("top".into(), BTreeMap::new())];
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !matches!(name, "plane" | "box" | "patch") {
                    return Err(Error::Parse(format!(
                        "scene line {lineno}: unknown section [{name}]"
                    )));
                }
                sections.push((name.to_string(), BTreeMap::new()));
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("scene line {lineno}: expected key=value")))?;
            let (section, map) = sections.last_mut().expect("top section");
            let key = key.trim();
            let v = num(section, key, value.trim(), lineno)?;
            if map.insert(key.to_string(), v).is_some() {
                return Err(Error::Parse(format!(
                    "scene line {lineno}: duplicate key `{key}`"
                )));
            }
        }

        let mut iter = sections.into_iter();
        let (_, mut top) = iter.next().expect("top section");
        let width = dimension(take(&mut top, "top", "width")?, "width")?;
        let height = dimension(take(&mut top, "top", "height")?, "height")?;
        let fx = take(&mut top, "top", "fx")?;
        let fy = take(&mut top, "top", "fy")?;
        let cx = take_or(&mut top, "cx", (width as f64 - 1.0) / 2.0);
        let cy = take_or(&mut top, "cy", (height as f64 - 1.0) / 2.0);
        let buffer = take_or(&mut top, "buffer", 0.0);
        if buffer < 0.0 || buffer.fract() != 0.0 {
            return Err(Error::Parse(format!(
                "scene `buffer` must be a non-negative integer, found {buffer}"
            )));
        }
        no_leftovers(top, "top")?;
        let intrinsics = CameraIntrinsics::new(fx, fy, cx, cy)
            .map_err(|e| Error::Parse(format!("scene: {e}")))?;

        let (mut plane, mut boxes, mut patch) = (None, Vec::new(), None);
        for (name, mut map) in iter {
            match name.as_str() {
                "plane" => {
                    if plane.is_some() {
                        return Err(Error::Parse("scene has more than one [plane]".into()));
                    }
                    let p = PlaneSpec {
                        distance: take(&mut map, "plane", "distance")?,
                        pitch_deg: take_or(&mut map, "pitch_deg", 0.0),
                        roll_deg: take_or(&mut map, "roll_deg", 0.0),
                    };
                    if p.distance <= 0.0 {
                        return Err(Error::Parse("plane distance must be positive".into()));
                    }
                    plane = Some(p);
                }
                "box" => {
                    let b = BoxSpec {
                        u0: take(&mut map, "box", "u0")?,
                        u1: take(&mut map, "box", "u1")?,
                        v0: take(&mut map, "box", "v0")?,
                        v1: take(&mut map, "box", "v1")?,
                        height: take(&mut map, "box", "height")?,
                    };
                    if !(b.u0 < b.u1 && b.v0 < b.v1 && b.height > 0.0) {
                        return Err(Error::Parse(
                            "box needs u0 < u1, v0 < v1 and height > 0".into(),
                        ));
                    }
                    boxes.push(b);
                }
                _ => {
                    if patch.is_some() {
                        return Err(Error::Parse("scene has more than one [patch]".into()));
                    }
                    let p = PatchSpec {
                        x0: take(&mut map, "patch", "x0")?,
                        x1: take(&mut map, "patch", "x1")?,
                        y0: take(&mut map, "patch", "y0")?,
                        y1: take(&mut map, "patch", "y1")?,
                    };
                    if !(p.x0 < p.x1 && p.y0 < p.y1) {
                        return Err(Error::Parse("patch needs x0 < x1 and y0 < y1".into()));
                    }
                    patch = Some(p);
                }
            }
            no_leftovers(map, &name)?;
        }
        Ok(Self {
            width,
            height,
            intrinsics,
            buffer: buffer as usize,
            plane: plane.ok_or_else(|| Error::Parse("scene has no [plane] section".into()))?,
            boxes,
            patch,
        })
    }
}

/// Analytic quantities of a rendered scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneTruth {
    pub tilt_deg: f64,
    /// Plane normal facing the camera.
    pub normal: Point3,
    /// True area of the patch on the plane, `A_xy / |n_z|`.
    pub patch_area: Option<f64>,
    /// Plane area inside the image frame, or `None` if a corner ray misses.
    pub frame_ground_area: Option<f64>,
    pub box_footprints: Vec<f64>,
}

impl SceneTruth {
    /// `key=value` lines; undefined values are written as `NA`.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| format!("{v:.12e}"));
        let mut s = String::new();
        let _ = writeln!(s, "tilt_deg={:.12e}", self.tilt_deg);
        let _ = writeln!(
            s,
            "normal={:.12e},{:.12e},{:.12e}",
            self.normal.x, self.normal.y, self.normal.z
        );
        let _ = writeln!(s, "patch_area={}", opt(self.patch_area));
        let _ = writeln!(s, "frame_ground_area={}", opt(self.frame_ground_area));
        for (i, a) in self.box_footprints.iter().enumerate() {
            let _ = writeln!(s, "box{i}_footprint_area={a:.12e}");
        }
        s
    }
}

/// Rasters of a rendered scene.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedScene {
    /// Depth of the nearest surface; 0 where the ray meets nothing.
    pub depth: Raster,
    /// Analytic normals with `n_z <= 0`; NaN where the ray meets nothing.
    pub normals: NormalRaster,
    /// Visible ground minus obstacles, dilated by the buffer.
    pub safe_mask: BinaryMask,
    /// Safe (unbuffered) ground pixels whose surface point lies in the patch.
    pub patch_mask: Option<BinaryMask>,
    pub truth: SceneTruth,
}

fn quad_area(p: [Point3; 4]) -> f64 {
    let a = p[1].sub(p[0]).cross(p[2].sub(p[0]));
    let b = p[2].sub(p[0]).cross(p[3].sub(p[0]));
    0.5 * (a.norm() + b.norm())
}

/// Ray-casts every pixel centre of the scene.
pub fn render(scene: &SceneSpec) -> RenderedScene {
    let (w, h) = (scene.width, scene.height);
    let intr = &scene.intrinsics;
    let frame = scene.plane.frame();
    let mut depth = Raster::zeros(w, h, 1);
    let mut normals = Raster::filled(w, h, 3, f32::NAN);
    let mut ground = BinaryMask::all_unsafe(w, h);
    let mut patch_mask = scene.patch.map(|_| BinaryMask::all_unsafe(w, h));

    for y in 0..h {
        for x in 0..w {
            let r = pixel_ray(x as f64, y as f64, intr);
            let mut best: Option<(f64, Point3, bool)> = frame.hit(r).map(|t| (t, frame.up, true));
            for b in &scene.boxes {
                if let Some((t, n)) = b.hit(&frame, r) {
                    if best.is_none_or(|(bt, _, _)| t < bt) {
                        best = Some((t, n, false));
                    }
                }
            }
            let Some((t, n, is_ground)) = best else {
                continue;
            };
            let n = if n.z > 0.0 { n.scale(-1.0) } else { n };
            depth.set(x, y, 0, t as f32);
            normals
                .pixel_mut(x, y)
                .copy_from_slice(&[n.x as f32, n.y as f32, n.z as f32]);
            if is_ground {
                ground.set(x, y, SAFE);
                if let (Some(pm), Some(p)) = (patch_mask.as_mut(), scene.patch) {
                    let q = r.scale(t);
                    if p.contains(q.x, q.y) {
                        pm.set(x, y, SAFE);
                    }
                }
            }
        }
    }

    let corners = [
        (-0.5, -0.5),
        (w as f64 - 0.5, -0.5),
        (w as f64 - 0.5, h as f64 - 0.5),
        (-0.5, h as f64 - 0.5),
    ];
    let corner_points: Option<Vec<Point3>> = corners
        .iter()
        .map(|&(u, v)| {
            let r = pixel_ray(u, v, intr);
            frame.hit(r).map(|t| r.scale(t))
        })
        .collect();
    let truth = SceneTruth {
        tilt_deg: scene.plane.tilt_deg(),
        normal: frame.up,
        patch_area: scene.patch.map(|p| p.xy_area() / frame.up.z.abs()),
        frame_ground_area: corner_points.map(|p| quad_area([p[0], p[1], p[2], p[3]])),
        box_footprints: scene.boxes.iter().map(BoxSpec::footprint_area).collect(),
    };
    RenderedScene {
        depth,
        normals: NormalRaster::from_raster(normals).expect("three channels"),
        safe_mask: dilate_unsafe(&ground, scene.buffer),
        patch_mask,
        truth,
    }
}
