use crate::error::{Error, Result};
use crate::losses::{decay_weight, validate_gamma, ClassWeights};
use crate::mask::{BinaryMask, ValidMask};
use crate::raster::Raster;

/// Probabilities are floored here before taking the log.
pub const LOG_PROB_FLOOR: f64 = 1e-12;

fn check(
    logits: &Raster,
    labels: &BinaryMask,
    cw: &ClassWeights,
    valid: &ValidMask,
) -> Result<usize> {
    logits.ensure_channels("landing-zone logits", 2)?;
    labels.ensure_size("labels vs logits", logits.width(), logits.height())?;
    valid.ensure_size("valid mask vs logits", logits.width(), logits.height())?;
    cw.validate()?;
    let n = valid.count();
    if n == 0 {
        return Err(Error::Degenerate(
            "cross-entropy has no valid pixels".into(),
        ));
    }
    Ok(n)
}

/// Weighted cross-entropy of one step and, optionally, its gradient scaled by
/// `grad_scale`. Channel 0 holds the safe logit, channel 1 the unsafe logit.
fn cross_entropy(
    logits: &Raster,
    labels: &BinaryMask,
    cw: &ClassWeights,
    valid: &ValidMask,
    n: usize,
    mut grad: Option<(&mut Raster, f64)>,
) -> Result<f64> {
    let floor = LOG_PROB_FLOOR.ln();
    let mut sum = 0.0;
    for (j, (&label, &ok)) in labels.labels().iter().zip(valid.as_slice()).enumerate() {
        if !ok {
            continue;
        }
        let z = [logits.data()[2 * j] as f64, logits.data()[2 * j + 1] as f64];
        if !(z[0].is_finite() && z[1].is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite logit at pixel {j}"
            )));
        }
        let m = z[0].max(z[1]);
        let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
        let y = label as usize;
        let w = cw.for_label(label);
        let log_p = z[y] - lse;
        sum -= w * log_p.max(floor);
        if let Some((g, scale)) = grad.as_mut() {
            if log_p > floor {
                for c in 0..2 {
                    let p = (z[c] - lse).exp();
                    let target = if c == y { 1.0 } else { 0.0 };
                    g.data_mut()[2 * j + c] = (*scale * w * (p - target) / n as f64) as f32;
                }
            }
        }
    }
    Ok(sum / n as f64)
}

/// Weighted cross-entropy of a single prediction, averaged over valid pixels.
pub fn slz_cross_entropy(
    logits: &Raster,
    labels: &BinaryMask,
    cw: &ClassWeights,
    valid: &ValidMask,
) -> Result<f64> {
    let n = check(logits, labels, cw, valid)?;
    cross_entropy(logits, labels, cw, valid, n, None)
}

/// Decay-weighted cross-entropy over a prediction sequence `t = 0..=T`,
/// where `T = logit_seq.len() - 1`.
pub fn slz_loss(
    logit_seq: &[Raster],
    labels: &BinaryMask,
    cw: &ClassWeights,
    gamma: f64,
    valid: &ValidMask,
) -> Result<f64> {
    run(logit_seq, labels, cw, gamma, valid, false).map(|(l, _)| l)
}

/// [`slz_loss`] with its gradient with respect to every logit raster.
/// Pixels whose true-class probability sits on the log floor get zero gradient.
pub fn slz_loss_grad(
    logit_seq: &[Raster],
    labels: &BinaryMask,
    cw: &ClassWeights,
    gamma: f64,
    valid: &ValidMask,
) -> Result<(f64, Vec<Raster>)> {
    run(logit_seq, labels, cw, gamma, valid, true)
}

fn run(
    logit_seq: &[Raster],
    labels: &BinaryMask,
    cw: &ClassWeights,
    gamma: f64,
    valid: &ValidMask,
    with_grad: bool,
) -> Result<(f64, Vec<Raster>)> {
    validate_gamma(gamma)?;
    let steps = logit_seq
        .len()
        .checked_sub(1)
        .ok_or_else(|| Error::InvalidInput("empty logit sequence".into()))?;
    let mut total = 0.0;
    let mut grads = Vec::new();
    for (t, logits) in logit_seq.iter().enumerate() {
        let n = check(logits, labels, cw, valid)?;
        let w = decay_weight(gamma, t, steps);
        let ce = if with_grad {
            let mut g = Raster::zeros(logits.width(), logits.height(), 2);
            let ce = cross_entropy(logits, labels, cw, valid, n, Some((&mut g, w)))?;
            grads.push(g);
            ce
        } else {
            cross_entropy(logits, labels, cw, valid, n, None)?
        };
        total += w * ce;
    }
    Ok((total, grads))
}
