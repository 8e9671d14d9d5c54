use std::path::PathBuf;

use clap::{Args, ValueEnum};

use slz_core::camera::CameraIntrinsics;
use slz_core::geometry::NormalRaster;
use slz_core::losses::{
    depth_normal_consistency, depth_normal_consistency_grad, fine_tune_loss, grad_check,
    sequential_depth_loss, sequential_depth_loss_grad, slz_loss, slz_loss_grad,
    virtual_normal_loss, LossComponents, LossWeights,
};
use slz_core::mask::{BinaryMask, ValidMask};
use slz_core::raster::Raster;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::inputs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossKind {
    /// Virtual normal loss between predicted and ground-truth depth
    Vnl,
    /// Decayed L1 depth + confidence loss over a prediction sequence
    Sequential,
    /// Depth-normal consistency
    Dncl,
    /// Decayed weighted cross-entropy over a logit sequence
    Slz,
    /// Weighted sum of vnl, sequential and dncl
    FineTune,
}

/// Evaluate one loss and optionally verify its gradient
#[derive(Debug, Args)]
pub struct LossArgs {
    #[arg(value_enum)]
    pub kind: LossKind,
    /// Predicted depth; repeat for a sequence t = 0..T (last one is used
    /// by vnl and dncl)
    #[arg(long = "pred-depth")]
    pub pred_depth: Vec<PathBuf>,
    /// Predicted confidence; repeat for a sequence
    #[arg(long = "pred-conf")]
    pub pred_conf: Vec<PathBuf>,
    /// Predicted normals (3 channels)
    #[arg(long)]
    pub pred_normals: Option<PathBuf>,
    #[arg(long)]
    pub gt_depth: Option<PathBuf>,
    #[arg(long)]
    pub gt_conf: Option<PathBuf>,
    /// Landing-zone logits (2 channels); repeat for a sequence
    #[arg(long)]
    pub logits: Vec<PathBuf>,
    /// Ground-truth safe/unsafe mask
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Pixels marked unsafe in this mask are left out
    #[arg(long)]
    pub ignore: Option<PathBuf>,
    /// Precomputed `vnl,sequential,dncl` values for fine-tune
    #[arg(long, value_delimiter = ',')]
    pub components: Option<Vec<f64>>,
    /// Compare analytic gradients with central differences
    #[arg(long)]
    pub grad_check: bool,
    /// Finite-difference step
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
}

fn need<'a>(v: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a PathBuf> {
    v.as_ref()
        .ok_or_else(|| CliError::input(format!("missing --{flag}")))
}

fn last_depth(args: &LossArgs) -> CliResult<Raster> {
    let p = args
        .pred_depth
        .last()
        .ok_or_else(|| CliError::input("missing --pred-depth"))?;
    inputs::raster(p)
}

fn load_all(paths: &[PathBuf], flag: &str) -> CliResult<Vec<Raster>> {
    if paths.is_empty() {
        return Err(CliError::input(format!("missing --{flag}")));
    }
    paths.iter().map(|p| inputs::raster(p)).collect()
}

fn valid_from_ignore(args: &LossArgs, w: usize, h: usize, base: ValidMask) -> CliResult<ValidMask> {
    let Some(p) = &args.ignore else {
        return Ok(base);
    };
    let ig = inputs::mask(p)?;
    ig.ensure_size("ignore mask", w, h)?;
    base.ensure_size("valid mask", w, h)?;
    Ok(ValidMask::from_fn(w, h, |x, y| {
        base.is_valid(x, y) && ig.is_safe(x, y)
    }))
}

struct SeqInputs {
    d: Vec<Raster>,
    c: Vec<Raster>,
    d_gt: Raster,
    c_gt: Raster,
    weights: LossWeights,
    valid: ValidMask,
}

fn sequential_inputs(args: &LossArgs, cfg: &RunConfig) -> CliResult<SeqInputs> {
    let d = load_all(&args.pred_depth, "pred-depth")?;
    let c = load_all(&args.pred_conf, "pred-conf")?;
    let d_gt = inputs::raster(need(&args.gt_depth, "gt-depth")?)?;
    let c_gt = inputs::raster(need(&args.gt_conf, "gt-conf")?)?;
    // T follows the number of predictions supplied
    let weights = LossWeights {
        steps: d.len() - 1,
        ..cfg.loss_weights()
    };
    if cfg.steps != weights.steps {
        log::info!(
            "using T={} from the {} depth predictions",
            weights.steps,
            d.len()
        );
    }
    let valid = valid_from_ignore(
        args,
        d_gt.width(),
        d_gt.height(),
        ValidMask::from_depth(&d_gt),
    )?;
    Ok(SeqInputs {
        d,
        c,
        d_gt,
        c_gt,
        weights,
        valid,
    })
}

fn dncl_inputs(args: &LossArgs) -> CliResult<(Raster, NormalRaster)> {
    let d = last_depth(args)?;
    let p = need(&args.pred_normals, "pred-normals")?;
    let n = NormalRaster::from_raster(inputs::raster(p)?).map_err(|e| CliError::from(e).at(p))?;
    Ok((d, n))
}

fn vnl(args: &LossArgs, cfg: &RunConfig, intr: &CameraIntrinsics) -> CliResult<f64> {
    let d = last_depth(args)?;
    let gt = inputs::raster(need(&args.gt_depth, "gt-depth")?)?;
    Ok(virtual_normal_loss(
        &d,
        &gt,
        intr,
        cfg.vnl_samples,
        cfg.seed,
    )?)
}

/// Prints `loss=<v>` and, with `--grad-check`, the worst relative error.
pub fn run(args: &LossArgs, cfg: &RunConfig) -> CliResult {
    if args.grad_check && matches!(args.kind, LossKind::Vnl | LossKind::FineTune) {
        return Err(CliError::input(
            "--grad-check is available for sequential, dncl and slz",
        ));
    }
    let mut worst: Option<f64> = None;
    let mut record = |e: f64| worst = Some(worst.map_or(e, |w: f64| w.max(e)));
    let value = match args.kind {
        LossKind::Vnl => {
            let (intr, _) = inputs::camera(cfg)?;
            vnl(args, cfg, &intr)?
        }
        LossKind::Sequential => {
            let s = sequential_inputs(args, cfg)?;
            let v = sequential_depth_loss(&s.d, &s.c, &s.d_gt, &s.c_gt, &s.weights, &s.valid)?;
            if args.grad_check {
                let g =
                    sequential_depth_loss_grad(&s.d, &s.c, &s.d_gt, &s.c_gt, &s.weights, &s.valid)?;
                for t in 0..s.d.len() {
                    let fd = |r: &Raster| {
                        let mut d = s.d.clone();
                        d[t] = r.clone();
                        sequential_depth_loss(&d, &s.c, &s.d_gt, &s.c_gt, &s.weights, &s.valid)
                    };
                    record(grad_check(fd, &s.d[t], &g.depth[t], args.eps)?.max_rel_error);
                    let fc = |r: &Raster| {
                        let mut c = s.c.clone();
                        c[t] = r.clone();
                        sequential_depth_loss(&s.d, &c, &s.d_gt, &s.c_gt, &s.weights, &s.valid)
                    };
                    record(grad_check(fc, &s.c[t], &g.conf[t], args.eps)?.max_rel_error);
                }
            }
            v
        }
        LossKind::Dncl => {
            let (intr, _) = inputs::camera(cfg)?;
            let (d, n) = dncl_inputs(args)?;
            let v = depth_normal_consistency(&d, &n, &intr)?;
            if args.grad_check {
                let (_, g) = depth_normal_consistency_grad(&d, &n, &intr)?;
                let f = |r: &Raster| depth_normal_consistency_grad(r, &n, &intr).map(|v| v.0);
                record(grad_check(f, &d, &g, args.eps)?.max_rel_error);
            }
            v
        }
        LossKind::Slz => {
            let seq = load_all(&args.logits, "logits")?;
            let labels: BinaryMask = inputs::mask(need(&args.labels, "labels")?)?;
            let (w, h) = (labels.width(), labels.height());
            let valid = valid_from_ignore(args, w, h, ValidMask::all(w, h))?;
            let cw = cfg.class_weights();
            let v = slz_loss(&seq, &labels, &cw, cfg.gamma, &valid)?;
            if args.grad_check {
                let (_, grads) = slz_loss_grad(&seq, &labels, &cw, cfg.gamma, &valid)?;
                for t in 0..seq.len() {
                    let f = |r: &Raster| {
                        let mut s = seq.clone();
                        s[t] = r.clone();
                        slz_loss(&s, &labels, &cw, cfg.gamma, &valid)
                    };
                    record(grad_check(f, &seq[t], &grads[t], args.eps)?.max_rel_error);
                }
            }
            v
        }
        LossKind::FineTune => {
            let c = match &args.components {
                Some(v) => match v[..] {
                    [vnl, sequential, dncl] => LossComponents {
                        vnl,
                        sequential,
                        dncl,
                    },
                    _ => {
                        return Err(CliError::input(
                            "--components takes three values: vnl,sequential,dncl",
                        ))
                    }
                },
                None => {
                    let (intr, _) = inputs::camera(cfg)?;
                    let s = sequential_inputs(args, cfg)?;
                    let (d, n) = dncl_inputs(args)?;
                    LossComponents {
                        vnl: vnl(args, cfg, &intr)?,
                        sequential: sequential_depth_loss(
                            &s.d, &s.c, &s.d_gt, &s.c_gt, &s.weights, &s.valid,
                        )?,
                        dncl: depth_normal_consistency(&d, &n, &intr)?,
                    }
                }
            };
            println!("vnl={:.17e}", c.vnl);
            println!("sequential={:.17e}", c.sequential);
            println!("dncl={:.17e}", c.dncl);
            fine_tune_loss(&c, &cfg.loss_weights())?
        }
    };
    println!("loss={value:.17e}");
    if let Some(e) = worst {
        println!("grad_check_max_rel_error={e:.6e}");
    }
    Ok(())
}
