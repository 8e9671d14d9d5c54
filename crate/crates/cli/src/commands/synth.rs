use std::path::PathBuf;

use clap::Args;

use slz_core::camera::IntrinsicsFile;
use slz_core::io;
use slz_core::synth::{render, SceneSpec};

use crate::error::{CliError, CliResult};

/// Render a synthetic scene with analytic ground truth
#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene description (key=value with [plane], [box], [patch] sections)
    #[arg(long)]
    pub scene: PathBuf,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &SynthArgs) -> CliResult {
    let text = std::fs::read_to_string(&args.scene)
        .map_err(|e| CliError::input(format!("{}: {e}", args.scene.display())))?;
    let scene: SceneSpec = text
        .parse()
        .map_err(|e| CliError::from(e).at(&args.scene))?;
    let out = render(&scene);
    let dir = &args.out;
    std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    io::write_raster(&out.depth, dir.join("depth.f32r"))?;
    io::write_raster(out.normals.raster(), dir.join("normals.f32r"))?;
    io::write_mask(&out.safe_mask, dir.join("mask.pgm"))?;
    if let Some(p) = &out.patch_mask {
        io::write_mask(p, dir.join("patch.pgm"))?;
    }
    let cam = IntrinsicsFile {
        intrinsics: scene.intrinsics,
        canonical: None,
    };
    io::write_text(dir.join("intrinsics.txt"), &cam.to_text())?;
    let truth = out.truth.to_text();
    io::write_text(dir.join("truth.txt"), &truth)?;
    print!("{truth}");
    Ok(())
}
