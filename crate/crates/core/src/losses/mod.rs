//! Training losses for the depth, normal and landing-zone branches, plus a
//! central-difference gradient checker.
//!
//! Every loss is computed in `f64` from `f32` rasters. Losses with analytic
//! gradients expose a `*_grad` companion returning the value together with
//! gradients shaped like the prediction inputs.

mod dncl;
mod gradcheck;
mod sequential;
mod slz;
mod vnl;

pub use dncl::{depth_normal_consistency, depth_normal_consistency_grad};
pub use gradcheck::{grad_check, GradCheck};
pub use sequential::{sequential_depth_loss, sequential_depth_loss_grad, SequentialGrad};
pub use slz::{slz_cross_entropy, slz_loss, slz_loss_grad, LOG_PROB_FLOOR};
pub use vnl::{sample_triplets, virtual_normal_loss, TripletSample, MAX_ATTEMPTS_PER_SAMPLE};

use crate::error::{Error, Result};

/// Balancing coefficients, temporal decay and iteration count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Weight of the virtual-normal term.
    pub lambda_vnl: f64,
    /// Weight of the decayed sequential depth/confidence sum.
    pub lambda_seq: f64,
    /// Weight of the depth-normal consistency term.
    pub lambda_dncl: f64,
    /// Per-step decay, `0 < gamma <= 1`.
    pub gamma: f64,
    /// Number of refinement iterations `T`; sequences hold `T + 1` predictions.
    pub steps: usize,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_vnl: 0.2,
            lambda_seq: 0.5,
            lambda_dncl: 0.01,
            gamma: 0.9,
            steps: 4,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_vnl", self.lambda_vnl),
            ("lambda_seq", self.lambda_seq),
            ("lambda_dncl", self.lambda_dncl),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        validate_gamma(self.gamma)
    }
}

pub(crate) fn validate_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "gamma must lie in (0, 1], got {gamma}"
        )));
    }
    Ok(())
}

/// Per-class weights of the landing-zone cross-entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights {
    pub safe: f64,
    pub unsafe_: f64,
}

impl Default for ClassWeights {
    fn default() -> Self {
        Self {
            safe: 2.0,
            unsafe_: 1.0,
        }
    }
}

impl ClassWeights {
    pub fn uniform() -> Self {
        Self {
            safe: 1.0,
            unsafe_: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.safe.is_finite()
            && self.safe > 0.0
            && self.unsafe_.is_finite()
            && self.unsafe_ > 0.0)
        {
            return Err(Error::InvalidInput(format!(
                "class weights must be finite and positive, got ({}, {})",
                self.safe, self.unsafe_
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn for_label(&self, label: u8) -> f64 {
        if label == crate::mask::SAFE {
            self.safe
        } else {
            self.unsafe_
        }
    }
}

/// Weight `gamma^(T - t)` of step `t` in a sequence of `T + 1` predictions.
#[inline]
pub fn decay_weight(gamma: f64, t: usize, steps: usize) -> f64 {
    gamma.powi((steps - t) as i32)
}

/// `sum_t gamma^(T - t) * per_step[t]` with `T = per_step.len() - 1`.
pub fn decayed_sum(per_step: &[f64], gamma: f64) -> f64 {
    let Some(last) = per_step.len().checked_sub(1) else {
        return 0.0;
    };
    per_step
        .iter()
        .enumerate()
        .map(|(t, l)| decay_weight(gamma, t, last) * l)
        .sum()
}

/// Already-evaluated loss terms for the fine-tuning objective.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossComponents {
    pub vnl: f64,
    /// Decay-weighted sequential sum, as returned by [`sequential_depth_loss`].
    pub sequential: f64,
    pub dncl: f64,
}

/// `lambda_vnl * vnl + lambda_seq * sequential + lambda_dncl * dncl`.
pub fn fine_tune_loss(c: &LossComponents, w: &LossWeights) -> Result<f64> {
    if !(c.vnl.is_finite() && c.sequential.is_finite() && c.dncl.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite loss component: {c:?}"
        )));
    }
    w.validate()?;
    Ok(w.lambda_vnl * c.vnl + w.lambda_seq * c.sequential + w.lambda_dncl * c.dncl)
}
