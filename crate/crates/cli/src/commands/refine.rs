use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;

use slz_core::io;
use slz_core::losses::{
    decay_weight, decayed_sum, sequential_depth_loss, slz_cross_entropy, LossWeights,
};
use slz_core::mask::{BinaryMask, ValidMask, SAFE, UNSAFE};
use slz_core::raster::Raster;
use slz_core::refinement::{
    run_refinement, upsample_to_base, RefinementState, RefinementWeights, DEFAULT_BASE,
    DEFAULT_HIDDEN_CHANNELS,
};
use slz_core::slz::binarize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::inputs;

/// Run the two refinement flows on a seeded state and write every step
#[derive(Debug, Args)]
pub struct RefineArgs {
    /// Base resolution; must be a multiple of 28
    #[arg(long, default_value_t = DEFAULT_BASE)]
    pub base: usize,
    /// Hidden channels of freshly seeded weights
    #[arg(long, default_value_t = DEFAULT_HIDDEN_CHANNELS)]
    pub hidden: usize,
    /// Weight bundle directory; seeded random weights otherwise
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Write the weights in use as a bundle
    #[arg(long)]
    pub save_weights: Option<PathBuf>,
    /// Continue from a saved state directory
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Ground-truth depth at base resolution
    #[arg(long)]
    pub gt_depth: Option<PathBuf>,
    /// Ground-truth mask at base resolution
    #[arg(long)]
    pub gt_mask: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

/// Ground truth used when none is supplied: the noiseless depth trend of
/// the seeded state, and a mask whose left half is safe.
fn synthetic_truth(w: usize, h: usize) -> (Raster, BinaryMask) {
    let depth = Raster::from_fn(w, h, 1, |x, y, _| 10.0 + 0.0125 * (x as f32 - y as f32));
    let mask = BinaryMask::from_fn(w, h, |x, _| if x < w / 2 { SAFE } else { UNSAFE });
    (depth, mask)
}

fn write_step(dir: &Path, state: &RefinementState) -> CliResult {
    let (d, n, l) = upsample_to_base(state);
    io::write_raster(&state.depth, dir.join("depth.f32r"))?;
    io::write_raster(&state.normal, dir.join("normal.f32r"))?;
    io::write_raster(&state.logits, dir.join("logits.f32r"))?;
    io::write_raster(&d, dir.join("depth_full.f32r"))?;
    io::write_raster(&n, dir.join("normal_full.f32r"))?;
    io::write_raster(&l, dir.join("logits_full.f32r"))?;
    io::write_mask(&binarize(&l)?, dir.join("mask_full.pgm"))?;
    Ok(())
}

pub fn run(args: &RefineArgs, cfg: &RunConfig) -> CliResult {
    let weights = match &args.weights {
        Some(p) => {
            let bundle = io::read_weight_bundle(p).map_err(|e| CliError::from(e).at(p))?;
            RefinementWeights::from_bundle(&bundle).map_err(|e| CliError::from(e).at(p))?
        }
        None => RefinementWeights::random(args.hidden, cfg.seed),
    };
    if let Some(p) = &args.save_weights {
        io::write_weight_bundle(&weights.to_bundle(), p)?;
    }
    let init = match &args.resume {
        Some(p) => {
            let bundle = io::read_weight_bundle(p).map_err(|e| CliError::from(e).at(p))?;
            RefinementState::from_bundle(&bundle).map_err(|e| CliError::from(e).at(p))?
        }
        None => RefinementState::seeded(
            args.base,
            args.base,
            weights.hidden_channels(),
            cfg.seed.wrapping_add(1),
        )?,
    };
    let seq = run_refinement(&init, &weights, cfg.steps)?;

    let (bw, bh) = init.base_size();
    let (syn_depth, syn_mask) = synthetic_truth(bw, bh);
    let gt_depth = match &args.gt_depth {
        Some(p) => inputs::raster(p)?,
        None => syn_depth,
    };
    let gt_mask = match &args.gt_mask {
        Some(p) => inputs::mask(p)?,
        None => syn_mask,
    };
    gt_depth.ensure_channels("ground-truth depth", 1)?;
    if gt_depth.width() != bw || gt_depth.height() != bh {
        return Err(CliError::shape(format!(
            "ground-truth depth is {}x{}, base resolution is {bw}x{bh}",
            gt_depth.width(),
            gt_depth.height()
        )));
    }
    gt_mask.ensure_size("ground-truth mask", bw, bh)?;

    let single = LossWeights {
        steps: 0,
        ..cfg.loss_weights()
    };
    let depth_valid = ValidMask::from_depth(&gt_depth);
    let all = ValidMask::all(bw, bh);
    let zero = Raster::zeros(bw, bh, 1);
    let cw = cfg.class_weights();
    let last = seq.len() - 1;
    let (mut l1s, mut ces) = (Vec::new(), Vec::new());
    let mut csv = String::from("step,decay_weight,depth_l1,slz_ce\n");
    for (i, state) in seq.iter().enumerate() {
        let dir = args.out.join(format!("step_{:02}", state.step));
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
        write_step(&dir, state)?;
        let (d, _, l) = upsample_to_base(state);
        let l1 = sequential_depth_loss(
            &[d],
            std::slice::from_ref(&zero),
            &gt_depth,
            &zero,
            &single,
            &depth_valid,
        )?;
        let ce = slz_cross_entropy(&l, &gt_mask, &cw, &all)?;
        let _ = writeln!(
            csv,
            "{},{:.6},{:.9e},{:.9e}",
            state.step,
            decay_weight(cfg.gamma, i, last),
            l1,
            ce
        );
        l1s.push(l1);
        ces.push(ce);
    }
    let _ = writeln!(
        csv,
        "total,,{:.9e},{:.9e}",
        decayed_sum(&l1s, cfg.gamma),
        decayed_sum(&ces, cfg.gamma)
    );
    let final_state = seq.last().expect("non-empty");
    io::write_weight_bundle(&final_state.to_bundle(), args.out.join("state"))?;
    log::info!(
        "ran steps {}..{} at base {bw}x{bh}",
        init.step,
        final_state.step
    );
    inputs::emit(&csv, Some(&args.out.join("losses.csv")))
}
