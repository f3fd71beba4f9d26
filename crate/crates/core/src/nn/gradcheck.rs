//! Central finite-difference gradient verification.

use super::Parameter;
use crate::error::{Error, Result};

/// A scalar function of some parameters with an analytic gradient.
pub trait Differentiable {
    fn params_mut(&mut self) -> Vec<&mut Parameter>;

    /// Function value at the current parameters.
    fn value(&mut self) -> Result<f64>;

    /// Function value, with the analytic gradient accumulated into each
    /// parameter's `grad`.
    fn value_and_grad(&mut self) -> Result<f64>;
}

/// Relative error used by [`grad_check`].
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

/// Compares analytic gradients against central differences for every
/// parameter coordinate and returns the largest relative error.
pub fn grad_check<D: Differentiable + ?Sized>(f: &mut D, eps: f64) -> Result<f64> {
    if !(1e-6..=1e-3).contains(&eps) {
        return Err(Error::Config(format!("finite-difference step {eps} outside [1e-6, 1e-3]")));
    }
    for p in f.params_mut() {
        p.zero_grad();
    }
    let base = f.value_and_grad()?;
    if !base.is_finite() {
        return Err(Error::Numeric("function value".into()));
    }
    let analytic: Vec<Vec<f64>> = f
        .params_mut()
        .into_iter()
        .map(|p| p.grad.as_slice().to_vec())
        .collect();
    if analytic.iter().flatten().any(|g| !g.is_finite()) {
        return Err(Error::Numeric("analytic gradient".into()));
    }

    let mut worst = 0.0f64;
    for (pi, grads) in analytic.iter().enumerate() {
        for (ci, &a) in grads.iter().enumerate() {
            let original = nudge(f, pi, ci, None);
            nudge(f, pi, ci, Some(original + eps));
            let plus = f.value()?;
            nudge(f, pi, ci, Some(original - eps));
            let minus = f.value()?;
            nudge(f, pi, ci, Some(original));
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numeric(format!("function value near parameter {pi}[{ci}]")));
            }
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max(relative_error(a, numeric));
        }
    }
    Ok(worst)
}

/// Sets coordinate `ci` of parameter `pi` (when `to` is given) and returns
/// its previous value.
fn nudge<D: Differentiable + ?Sized>(f: &mut D, pi: usize, ci: usize, to: Option<f64>) -> f64 {
    let mut params = f.params_mut();
    let slot = &mut params[pi].value.as_mut_slice()[ci];
    let old = *slot;
    if let Some(v) = to {
        *slot = v;
    }
    old
}
