//! Landing-zone mask post-processing: binarisation, 4-connected safe regions,
//! area-ranked candidates and square dilation of the unsafe set.

use std::collections::VecDeque;

use crate::camera::CameraIntrinsics;
use crate::error::Result;
use crate::geometry::{region_area, AreaReport, NormalRaster};
use crate::mask::{BinaryMask, SAFE, UNSAFE};
use crate::raster::Raster;

/// Per-pixel argmax of `(safe, unsafe)` logits; ties go to unsafe.
pub fn binarize(logits: &Raster) -> Result<BinaryMask> {
    logits.ensure_channels("landing-zone logits", 2)?;
    Ok(BinaryMask::from_fn(
        logits.width(),
        logits.height(),
        |x, y| {
            let px = logits.pixel(x, y);
            if px[0] > px[1] {
                SAFE
            } else {
                UNSAFE
            }
        },
    ))
}

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

/// A 4-connected set of safe pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    /// Position in row-major order of the region's first pixel.
    pub id: usize,
    /// `(x, y)` coordinates in row-major order.
    pub pixels: Vec<(usize, usize)>,
    pub bbox: BoundingBox,
}

/// Labels the 4-connected components of the safe pixels.
pub fn connected_components(mask: &BinaryMask) -> Vec<Region> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut regions = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if seen[start] || mask.labels()[start] != SAFE {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            pixels.push((x, y));
            let mut visit = |j: usize| {
                if !seen[j] && mask.labels()[j] == SAFE {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        pixels.sort_unstable_by_key(|&(x, y)| (y, x));
        let bbox = BoundingBox {
            min_x: pixels.iter().map(|p| p.0).min().expect("non-empty"),
            max_x: pixels.iter().map(|p| p.0).max().expect("non-empty"),
            min_y: pixels[0].1,
            max_y: pixels[pixels.len() - 1].1,
        };
        regions.push(Region {
            id: regions.len(),
            pixels,
            bbox,
        });
    }
    regions
}

/// A ranked landing-zone candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct LandingCandidate {
    pub region: Region,
    pub area: AreaReport,
}

/// The `k` safe regions with the largest estimated area, largest first;
/// equal areas are ordered by region id.
pub fn top_k_candidates(
    mask: &BinaryMask,
    depth: &Raster,
    normals: &NormalRaster,
    intr: &CameraIntrinsics,
    k: usize,
    n_z_min: f64,
) -> Result<Vec<LandingCandidate>> {
    depth.ensure_same_size("depth vs normals", normals.raster())?;
    mask.ensure_size("candidate mask", depth.width(), depth.height())?;
    let mut candidates = connected_components(mask)
        .into_iter()
        .map(|region| {
            let area = region_area(mask, &region.pixels, depth, normals, intr, n_z_min)?;
            Ok(LandingCandidate { region, area })
        })
        .collect::<Result<Vec<_>>>()?;
    candidates.sort_by(|a, b| {
        b.area
            .total_area
            .total_cmp(&a.area.total_area)
            .then(a.region.id.cmp(&b.region.id))
    });
    candidates.truncate(k);
    Ok(candidates)
}

/// Grows the unsafe set by a `(2r+1) x (2r+1)` square structuring element.
/// Pixels outside the image are not treated as unsafe.
pub fn dilate_unsafe(mask: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width(), mask.height());
    // separable: horizontal pass then vertical pass
    let mut rows = vec![SAFE; w * h];
    for y in 0..h {
        let line = &mask.labels()[y * w..(y + 1) * w];
        for x in 0..w {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius).min(w - 1);
            if line[lo..=hi].contains(&UNSAFE) {
                rows[y * w + x] = UNSAFE;
            }
        }
    }
    BinaryMask::from_fn(w, h, |x, y| {
        let lo = y.saturating_sub(radius);
        let hi = (y + radius).min(h - 1);
        if (lo..=hi).any(|yy| rows[yy * w + x] == UNSAFE) {
            UNSAFE
        } else {
            SAFE
        }
    })
}
