//! Central-difference gradient verification.

use super::Scalar;
use crate::{Error, Result};

/// Compare an analytic gradient against central differences of `loss_fn`.
///
/// Returns `max_j |analytic_j - cd_j| / max(1, |cd_j|)` over all coordinates,
/// where `cd_j = (f(x + eps e_j) - f(x - eps e_j)) / (2 eps)`.
pub fn finite_diff_check<F: Scalar>(
    mut loss_fn: impl FnMut(&[F]) -> Result<F>,
    params: &[F],
    analytic_grad: &[F],
    epsilon: f64,
) -> Result<f64> {
    if !(1e-6..=1e-3).contains(&epsilon) {
        return Err(Error::Domain(format!(
            "finite_diff_check epsilon {epsilon} outside [1e-6, 1e-3]"
        )));
    }
    if params.len() != analytic_grad.len() {
        return Err(Error::shape(
            "finite_diff_check gradient length",
            params.len(),
            analytic_grad.len(),
        ));
    }
    let eps = F::from_f64_c(epsilon);
    let mut point = params.to_vec();
    let mut worst = 0.0_f64;
    for j in 0..params.len() {
        let orig = point[j];
        point[j] = orig + eps;
        let hi = loss_fn(&point)?;
        point[j] = orig - eps;
        let lo = loss_fn(&point)?;
        point[j] = orig;
        if !hi.is_finite() || !lo.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss near coordinate {j}"
            )));
        }
        let cd = (hi - lo).to_f64_c() / (2.0 * epsilon);
        let rel = (analytic_grad[j].to_f64_c() - cd).abs() / cd.abs().max(1.0);
        if rel > worst {
            worst = rel;
        }
    }
    Ok(worst)
}
