use crate::error::{Error, Result};
use crate::raster::Raster;

/// Outcome of a finite-difference gradient comparison.
#[derive(Debug, Clone)]
pub struct GradCheck {
    /// Largest `|a - n| / max(|a|, |n|, 1e-8)` over all elements.
    pub max_rel_error: f64,
    /// Flat index of the element attaining `max_rel_error`.
    pub worst_index: usize,
    /// Central-difference estimate for every element.
    pub numeric: Vec<f64>,
}

/// Compares `analytic` against central differences of `f` around `x`.
///
/// Each element is perturbed to `x ± eps` in `f32`; the step actually
/// realised after rounding is used as the divisor.
pub fn grad_check<F>(mut f: F, x: &Raster, analytic: &Raster, eps: f64) -> Result<GradCheck>
where
    F: FnMut(&Raster) -> Result<f64>,
{
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidInput(format!(
            "step must be positive, got {eps}"
        )));
    }
    if !x.same_shape(analytic) {
        return Err(Error::Shape(
            "analytic gradient and parameter differ in shape".into(),
        ));
    }
    let mut probe = x.clone();
    let mut numeric = Vec::with_capacity(x.len());
    let mut worst = (0.0f64, 0usize);
    for i in 0..x.len() {
        let x0 = x.data()[i] as f64;
        let hi = (x0 + eps) as f32;
        let lo = (x0 - eps) as f32;
        let step = hi as f64 - lo as f64;
        if step <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "step {eps} vanishes in f32 at element {i} (value {x0})"
            )));
        }
        probe.data_mut()[i] = hi;
        let f_hi = f(&probe)?;
        probe.data_mut()[i] = lo;
        let f_lo = f(&probe)?;
        probe.data_mut()[i] = x.data()[i];
        if !(f_hi.is_finite() && f_lo.is_finite()) {
            return Err(Error::Degenerate(format!(
                "function is not finite around element {i}"
            )));
        }
        let n = (f_hi - f_lo) / step;
        let a = analytic.data()[i] as f64;
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        if rel > worst.0 {
            worst = (rel, i);
        }
        numeric.push(n);
    }
    Ok(GradCheck {
        max_rel_error: worst.0,
        worst_index: worst.1,
        numeric,
    })
}
