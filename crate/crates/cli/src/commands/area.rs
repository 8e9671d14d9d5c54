use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;

use slz_core::geometry::{region_area, AreaReport};
use slz_core::slz::{connected_components, BoundingBox};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::inputs;

/// Tilt-corrected metric area of the safe regions of a mask
#[derive(Debug, Args)]
pub struct AreaArgs {
    /// Metric depth raster (F32R, 1 channel)
    #[arg(long)]
    pub depth: PathBuf,
    /// Normal raster (F32R, 3 channels)
    #[arg(long)]
    pub normals: Option<PathBuf>,
    /// Estimate normals from the depth raster instead
    #[arg(long)]
    pub derive_normals: bool,
    /// Safe/unsafe mask (PGM)
    #[arg(long)]
    pub mask: PathBuf,
    /// The depth raster holds canonical-space depth
    #[arg(long)]
    pub canonical: bool,
    /// Report only this region
    #[arg(long)]
    pub region_id: Option<usize>,
    /// Also write the CSV here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const AREA_HEADER: &str = "region,pixels,excluded,area_m2,min_x,min_y,max_x,max_y";

pub(crate) fn row(out: &mut String, label: &str, a: &AreaReport, b: Option<&BoundingBox>) {
    let _ = write!(
        out,
        "{label},{},{},{:.9e}",
        a.pixel_count, a.excluded_count, a.total_area
    );
    match b {
        Some(b) => {
            let _ = writeln!(out, ",{},{},{},{}", b.min_x, b.min_y, b.max_x, b.max_y);
        }
        None => out.push_str(",,,,\n"),
    }
}

pub fn run(args: &AreaArgs, cfg: &RunConfig) -> CliResult {
    let (intr, spec) = inputs::camera(cfg)?;
    let depth = inputs::depth(&args.depth, args.canonical, &intr, &spec)?;
    let normals = inputs::normals(&depth, args.normals.as_ref(), args.derive_normals, &intr)?;
    let mask = inputs::mask(&args.mask)?;
    mask.ensure_size("mask vs depth", depth.width(), depth.height())?;
    depth.ensure_same_size("depth vs normals", normals.raster())?;

    let mut regions = connected_components(&mask);
    if let Some(id) = args.region_id {
        if id >= regions.len() {
            return Err(CliError::input(format!(
                "region {id} does not exist ({} regions)",
                regions.len()
            )));
        }
        regions = vec![regions.swap_remove(id)];
    }
    let mut csv = format!("{AREA_HEADER}\n");
    let mut total = AreaReport::default();
    for r in &regions {
        let a = region_area(&mask, &r.pixels, &depth, &normals, &intr, cfg.n_z_min)?;
        row(&mut csv, &r.id.to_string(), &a, Some(&r.bbox));
        total.total_area += a.total_area;
        total.pixel_count += a.pixel_count;
        total.excluded_count += a.excluded_count;
    }
    row(&mut csv, "total", &total, None);
    log::info!(
        "{} regions, {:.4} m² over {} pixels",
        regions.len(),
        total.total_area,
        total.pixel_count
    );
    inputs::emit(&csv, args.out.as_ref())
}
