//! Run configuration: built-in defaults, overridden by a `key=value` config
//! file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;

use slz_core::camera::DEFAULT_CANONICAL_FOCAL;
use slz_core::geometry::DEFAULT_NZ_MIN;
use slz_core::losses::{ClassWeights, LossWeights};

use crate::error::CliError;

/// Defaults table shown in `--help`.
pub const DEFAULTS_HELP: &str = "\
Defaults (flags > --config file > built-in):
  steps      = 4      refinement iterations T
  gamma      = 0.9    temporal decay
  lambda_vnl = 0.2    virtual normal weight
  lambda_seq = 0.5    sequential depth weight
  lambda_dncl= 0.01   depth-normal consistency weight
  w_safe     = 2      safe-class cross-entropy weight
  w_unsafe   = 1      unsafe-class cross-entropy weight
  n_z_min    = 0.1    steepness cut-off for area estimation
  radius     = 0      unsafe dilation radius, pixels
  top_k      = 5      landing candidates reported
  f_c        = 1000   canonical focal length, pixels
  seed       = 0
  vnl_samples= 100    triplets drawn by the virtual normal loss

Exit status: 0 ok, 2 input or parse error, 3 shape mismatch, 4 numeric degeneracy.";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub intrinsics: Option<PathBuf>,
    /// Explicit canonical focal length; otherwise the intrinsics file's
    /// `f_c`, then the built-in default.
    pub f_c: Option<f64>,
    pub n_z_min: f64,
    pub radius: usize,
    pub top_k: usize,
    pub seed: u64,
    pub steps: usize,
    pub gamma: f64,
    pub lambda_vnl: f64,
    pub lambda_seq: f64,
    pub lambda_dncl: f64,
    pub w_safe: f64,
    pub w_unsafe: f64,
    pub vnl_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let lw = LossWeights::default();
        let cw = ClassWeights::default();
        Self {
            intrinsics: None,
            f_c: None,
            n_z_min: DEFAULT_NZ_MIN,
            radius: 0,
            top_k: 5,
            seed: 0,
            steps: lw.steps,
            gamma: lw.gamma,
            lambda_vnl: lw.lambda_vnl,
            lambda_seq: lw.lambda_seq,
            lambda_dncl: lw.lambda_dncl,
            w_safe: cw.safe,
            w_unsafe: cw.unsafe_,
            vnl_samples: 100,
        }
    }
}

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Config file of `key=value` lines
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Intrinsics file (fx, fy, cx, cy, optional f_c)
    #[arg(long, global = true, value_name = "FILE")]
    pub intrinsics: Option<PathBuf>,
    #[arg(long, global = true)]
    pub f_c: Option<f64>,
    #[arg(long, global = true)]
    pub n_z_min: Option<f64>,
    #[arg(long, global = true)]
    pub radius: Option<usize>,
    #[arg(long = "k", alias = "top-k", global = true)]
    pub top_k: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long = "steps", short = 'T', global = true)]
    pub steps: Option<usize>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub lambda_vnl: Option<f64>,
    #[arg(long, global = true)]
    pub lambda_seq: Option<f64>,
    #[arg(long, global = true)]
    pub lambda_dncl: Option<f64>,
    #[arg(long, global = true)]
    pub w_safe: Option<f64>,
    #[arg(long, global = true)]
    pub w_unsafe: Option<f64>,
    #[arg(long, global = true)]
    pub vnl_samples: Option<usize>,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, lineno: usize) -> Result<T, CliError> {
    value.parse().map_err(|_| {
        CliError::input(format!(
            "config line {lineno}: bad value `{value}` for `{key}`"
        ))
    })
}

impl RunConfig {
    /// Applies `key=value` lines on top of `self`. Relative `intrinsics`
    /// paths resolve against `base_dir`.
    pub fn apply_text(&mut self, text: &str, base_dir: &Path) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::input(format!("config line {lineno}: expected key=value"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "intrinsics" => self.intrinsics = Some(base_dir.join(value)),
                "f_c" => self.f_c = Some(parse_value(key, value, lineno)?),
                "n_z_min" => self.n_z_min = parse_value(key, value, lineno)?,
                "radius" => self.radius = parse_value(key, value, lineno)?,
                "top_k" => self.top_k = parse_value(key, value, lineno)?,
                "seed" => self.seed = parse_value(key, value, lineno)?,
                "steps" => self.steps = parse_value(key, value, lineno)?,
                "gamma" => self.gamma = parse_value(key, value, lineno)?,
                "lambda_vnl" => self.lambda_vnl = parse_value(key, value, lineno)?,
                "lambda_seq" => self.lambda_seq = parse_value(key, value, lineno)?,
                "lambda_dncl" => self.lambda_dncl = parse_value(key, value, lineno)?,
                "w_safe" => self.w_safe = parse_value(key, value, lineno)?,
                "w_unsafe" => self.w_unsafe = parse_value(key, value, lineno)?,
                "vnl_samples" => self.vnl_samples = parse_value(key, value, lineno)?,
                other => {
                    return Err(CliError::input(format!(
                        "config line {lineno}: unknown key `{other}`"
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn apply_flags(&mut self, o: &Overrides) {
        if let Some(p) = &o.intrinsics {
            self.intrinsics = Some(p.clone());
        }
        if o.f_c.is_some() {
            self.f_c = o.f_c;
        }
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = o.$field { self.$field = v; })*
            };
        }
        take!(
            n_z_min,
            radius,
            top_k,
            seed,
            steps,
            gamma,
            lambda_vnl,
            lambda_seq,
            lambda_dncl,
            w_safe,
            w_unsafe,
            vnl_samples
        );
    }

    /// Defaults, then the config file named by `--config`, then flags.
    pub fn resolve(o: &Overrides) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        if let Some(path) = &o.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            cfg.apply_text(&text, path.parent().unwrap_or(Path::new(".")))?;
        }
        cfg.apply_flags(o);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.loss_weights().validate()?;
        self.class_weights().validate()?;
        if !(self.n_z_min.is_finite() && (0.0..=1.0).contains(&self.n_z_min)) {
            return Err(CliError::input(format!(
                "n_z_min must lie in [0, 1], got {}",
                self.n_z_min
            )));
        }
        if let Some(f) = self.f_c {
            slz_core::camera::CanonicalSpec::new(f)?;
        }
        if self.vnl_samples == 0 {
            return Err(CliError::input("vnl_samples must be positive"));
        }
        Ok(())
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda_vnl: self.lambda_vnl,
            lambda_seq: self.lambda_seq,
            lambda_dncl: self.lambda_dncl,
            gamma: self.gamma,
            steps: self.steps,
        }
    }

    pub fn class_weights(&self) -> ClassWeights {
        ClassWeights {
            safe: self.w_safe,
            unsafe_: self.w_unsafe,
        }
    }

    pub fn canonical_focal(&self, from_file: Option<f64>) -> f64 {
        self.f_c.or(from_file).unwrap_or(DEFAULT_CANONICAL_FOCAL)
    }
}
