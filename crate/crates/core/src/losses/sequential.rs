use crate::error::{Error, Result};
use crate::losses::{decay_weight, validate_gamma, LossWeights};
use crate::mask::ValidMask;
use crate::raster::Raster;

/// Value and gradients of the sequential depth loss.
#[derive(Debug, Clone)]
pub struct SequentialGrad {
    pub loss: f64,
    /// Gradient with respect to each depth prediction, `t = 0..=T`.
    pub depth: Vec<Raster>,
    /// Gradient with respect to each confidence prediction, `t = 0..=T`.
    pub conf: Vec<Raster>,
}

fn check_inputs(
    d_preds: &[Raster],
    conf_preds: &[Raster],
    d_gt: &Raster,
    c_gt: &Raster,
    weights: &LossWeights,
    valid: &ValidMask,
) -> Result<usize> {
    validate_gamma(weights.gamma)?;
    let expected = weights.steps + 1;
    if d_preds.len() != expected || conf_preds.len() != expected {
        return Err(Error::Shape(format!(
            "expected {expected} depth and confidence predictions for T={}, got {} and {}",
            weights.steps,
            d_preds.len(),
            conf_preds.len()
        )));
    }
    d_gt.ensure_channels("ground-truth depth", 1)?;
    c_gt.ensure_channels("ground-truth confidence", 1)?;
    c_gt.ensure_same_size("confidence label vs depth label", d_gt)?;
    valid.ensure_size("sequential loss", d_gt.width(), d_gt.height())?;
    for r in d_preds.iter().chain(conf_preds) {
        r.ensure_channels("prediction", 1)?;
        r.ensure_same_size("prediction vs label", d_gt)?;
    }
    let n = valid.count();
    if n == 0 {
        return Err(Error::Degenerate(
            "sequential loss has no valid pixels".into(),
        ));
    }
    Ok(n)
}

/// Mean absolute difference over valid pixels, with the sign of each residual.
fn l1_with_sign(
    pred: &Raster,
    gt: &Raster,
    valid: &ValidMask,
    n: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut sum = 0.0;
    let mut sign = vec![0.0; pred.len()];
    for (i, ((&p, &g), &ok)) in pred
        .data()
        .iter()
        .zip(gt.data())
        .zip(valid.as_slice())
        .enumerate()
    {
        if !ok {
            continue;
        }
        let r = p as f64 - g as f64;
        if !r.is_finite() {
            return Err(Error::InvalidInput(format!(
                "non-finite value at valid pixel {i}"
            )));
        }
        sum += r.abs();
        sign[i] = if r > 0.0 {
            1.0
        } else if r < 0.0 {
            -1.0
        } else {
            0.0
        };
    }
    Ok((sum / n as f64, sign))
}

/// `sum_t gamma^(T-t) * (L1_t + Lconf_t)` where both terms are mean absolute
/// errors over the valid pixels. `t = 0` is the initial prediction.
pub fn sequential_depth_loss(
    d_preds: &[Raster],
    conf_preds: &[Raster],
    d_gt: &Raster,
    c_gt: &Raster,
    weights: &LossWeights,
    valid: &ValidMask,
) -> Result<f64> {
    Ok(sequential_depth_loss_grad(d_preds, conf_preds, d_gt, c_gt, weights, valid)?.loss)
}

/// [`sequential_depth_loss`] with its (sub)gradients. A zero residual gets a
/// zero gradient.
pub fn sequential_depth_loss_grad(
    d_preds: &[Raster],
    conf_preds: &[Raster],
    d_gt: &Raster,
    c_gt: &Raster,
    weights: &LossWeights,
    valid: &ValidMask,
) -> Result<SequentialGrad> {
    let n = check_inputs(d_preds, conf_preds, d_gt, c_gt, weights, valid)?;
    let mut loss = 0.0;
    let mut grad_d = Vec::with_capacity(d_preds.len());
    let mut grad_c = Vec::with_capacity(conf_preds.len());
    let to_grad = |sign: Vec<f64>, scale: f64| {
        Raster::from_vec(
            d_gt.width(),
            d_gt.height(),
            1,
            sign.into_iter().map(|s| (s * scale) as f32).collect(),
        )
    };
    for (t, (dp, cp)) in d_preds.iter().zip(conf_preds).enumerate() {
        let w = decay_weight(weights.gamma, t, weights.steps);
        let (l1, sd) = l1_with_sign(dp, d_gt, valid, n)?;
        let (lc, sc) = l1_with_sign(cp, c_gt, valid, n)?;
        loss += w * (l1 + lc);
        grad_d.push(to_grad(sd, w / n as f64)?);
        grad_c.push(to_grad(sc, w / n as f64)?);
    }
    Ok(SequentialGrad {
        loss,
        depth: grad_d,
        conf: grad_c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights(steps: usize, gamma: f64) -> LossWeights {
        LossWeights {
            steps,
            gamma,
            ..Default::default()
        }
    }

    #[test]
    fn perfect_prediction_is_zero() {
        let gt = Raster::filled(4, 4, 1, 3.0);
        let c = Raster::filled(4, 4, 1, 1.0);
        let v = ValidMask::all(4, 4);
        let l = sequential_depth_loss(
            std::slice::from_ref(&gt),
            std::slice::from_ref(&c),
            &gt,
            &c,
            &weights(0, 0.9),
            &v,
        )
        .unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn two_steps_decay() {
        let gt = Raster::filled(4, 4, 1, 3.0);
        let c = Raster::filled(4, 4, 1, 1.0);
        let pred = Raster::filled(4, 4, 1, 3.5);
        let conf = Raster::filled(4, 4, 1, 0.75);
        let v = ValidMask::all(4, 4);
        // per-step L = 0.5 + 0.25
        let l = sequential_depth_loss(
            &[pred.clone(), pred.clone()],
            &[conf.clone(), conf.clone()],
            &gt,
            &c,
            &weights(1, 0.9),
            &v,
        )
        .unwrap();
        assert!((l - 1.9 * 0.75).abs() <= 1e-12);
    }

    #[test]
    fn length_mismatch_and_empty_valid() {
        let gt = Raster::filled(4, 4, 1, 3.0);
        let v = ValidMask::all(4, 4);
        assert!(matches!(
            sequential_depth_loss(
                std::slice::from_ref(&gt),
                std::slice::from_ref(&gt),
                &gt,
                &gt,
                &weights(1, 0.9),
                &v
            ),
            Err(Error::Shape(_))
        ));
        let none = ValidMask::from_fn(4, 4, |_, _| false);
        assert!(matches!(
            sequential_depth_loss(
                std::slice::from_ref(&gt),
                std::slice::from_ref(&gt),
                &gt,
                &gt,
                &weights(0, 0.9),
                &none
            ),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn invalid_pixels_do_not_count() {
        let gt = Raster::filled(2, 1, 1, 1.0);
        let pred = Raster::from_vec(2, 1, 1, vec![2.0, 100.0]).unwrap();
        let v = ValidMask::from_fn(2, 1, |x, _| x == 0);
        let l = sequential_depth_loss(
            &[pred],
            std::slice::from_ref(&gt),
            &gt,
            &gt,
            &weights(0, 0.9),
            &v,
        )
        .unwrap();
        assert_eq!(l, 1.0);
    }
}
