use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;

use slz_core::io;
use slz_core::slz::{binarize, dilate_unsafe, top_k_candidates};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::inputs;

/// Rank the largest safe regions as landing candidates
#[derive(Debug, Args)]
pub struct CandidatesArgs {
    #[arg(long)]
    pub depth: PathBuf,
    #[arg(long)]
    pub normals: Option<PathBuf>,
    #[arg(long)]
    pub derive_normals: bool,
    /// Two-channel (safe, unsafe) logit raster
    #[arg(long, conflicts_with = "mask")]
    pub logits: Option<PathBuf>,
    /// Safe/unsafe mask (PGM)
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub canonical: bool,
    /// Write the dilated mask used for ranking
    #[arg(long)]
    pub save_mask: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const CANDIDATE_HEADER: &str = "rank,region,pixels,excluded,area_m2,min_x,min_y,max_x,max_y";

pub fn run(args: &CandidatesArgs, cfg: &RunConfig) -> CliResult {
    let (intr, spec) = inputs::camera(cfg)?;
    let depth = inputs::depth(&args.depth, args.canonical, &intr, &spec)?;
    let normals = inputs::normals(&depth, args.normals.as_ref(), args.derive_normals, &intr)?;
    let mask = match (&args.logits, &args.mask) {
        (Some(p), None) => binarize(&inputs::raster(p)?).map_err(|e| CliError::from(e).at(p))?,
        (None, Some(p)) => inputs::mask(p)?,
        _ => return Err(CliError::input("need exactly one of --logits or --mask")),
    };
    mask.ensure_size("mask vs depth", depth.width(), depth.height())?;
    let mask = dilate_unsafe(&mask, cfg.radius);
    if let Some(p) = &args.save_mask {
        io::write_mask(&mask, p)?;
    }

    let ranked = top_k_candidates(&mask, &depth, &normals, &intr, cfg.top_k, cfg.n_z_min)?;
    let mut csv = format!("{CANDIDATE_HEADER}\n");
    for (rank, c) in ranked.iter().enumerate() {
        let b = &c.region.bbox;
        let a = &c.area;
        let _ = writeln!(
            csv,
            "{},{},{},{},{:.9e},{},{},{},{}",
            rank + 1,
            c.region.id,
            a.pixel_count,
            a.excluded_count,
            a.total_area,
            b.min_x,
            b.min_y,
            b.max_x,
            b.max_y
        );
    }
    inputs::emit(&csv, args.out.as_ref())
}
