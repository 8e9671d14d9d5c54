//! Loading helpers that attach the offending path to every error.

use std::path::{Path, PathBuf};

use slz_core::camera::{from_canonical, CameraIntrinsics, CanonicalSpec};
use slz_core::geometry::{normals_from_depth, NormalRaster};
use slz_core::io;
use slz_core::mask::BinaryMask;
use slz_core::raster::Raster;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub fn raster(path: &Path) -> CliResult<Raster> {
    io::read_raster(path).map_err(|e| CliError::from(e).at(path))
}

pub fn mask(path: &Path) -> CliResult<BinaryMask> {
    io::read_mask(path).map_err(|e| CliError::from(e).at(path))
}

/// Intrinsics from `--intrinsics` (or the config file) and the resolved
/// canonical spec.
pub fn camera(cfg: &RunConfig) -> CliResult<(CameraIntrinsics, CanonicalSpec)> {
    let path = cfg.intrinsics.as_ref().ok_or_else(|| {
        CliError::input("no intrinsics given (use --intrinsics or `intrinsics=` in --config)")
    })?;
    let file = io::read_intrinsics(path).map_err(|e| CliError::from(e).at(path))?;
    let spec = CanonicalSpec::new(cfg.canonical_focal(file.canonical.map(|c| c.focal)))?;
    Ok((file.intrinsics, spec))
}

/// Depth raster, converted back to metric units when it holds canonical depth.
pub fn depth(
    path: &Path,
    canonical: bool,
    intr: &CameraIntrinsics,
    spec: &CanonicalSpec,
) -> CliResult<Raster> {
    let d = raster(path)?;
    d.ensure_channels("depth", 1)
        .map_err(|e| CliError::from(e).at(path))?;
    if canonical {
        Ok(from_canonical(&d, intr, spec)?)
    } else {
        Ok(d)
    }
}

/// Normals read from a file or derived from `depth`.
pub fn normals(
    depth: &Raster,
    file: Option<&PathBuf>,
    derive: bool,
    intr: &CameraIntrinsics,
) -> CliResult<NormalRaster> {
    match (file, derive) {
        (Some(_), true) => Err(CliError::input(
            "give either --normals or --derive-normals, not both",
        )),
        (None, false) => Err(CliError::input("need --normals FILE or --derive-normals")),
        (None, true) => Ok(normals_from_depth(depth, intr)?),
        (Some(p), false) => {
            let r = raster(p)?;
            NormalRaster::from_raster(r).map_err(|e| CliError::from(e).at(p))
        }
    }
}

/// Writes `text` to stdout and, when given, to `out`.
pub fn emit(text: &str, out: Option<&PathBuf>) -> CliResult {
    print!("{text}");
    if let Some(p) = out {
        io::write_text(p, text)?;
    }
    Ok(())
}
