//! The training objective: CTC negative log-likelihood over alignments plus
//! per-time-step KL regularizers with their closed forms.

pub mod ctc;

pub use ctc::ctc_neg_log_likelihood;

use crate::numerics::tape::{Tape, Var};
use crate::numerics::Scalar;
use crate::relgraph::{EdgeDistVars, EdgePosterior, EdgePrior};
use crate::{Error, Result};

/// Guard distance from 0 for the Binomial-bound arguments.
pub const M_GUARD: f64 = 1e-8;

/// Closed-form upper bound for the KL divergence between the two degenerate
/// Binomial edge laws with proxy means `m` (posterior) and `m0` (prior):
///
///   m ln(m / m0) + (1 - m) ln((1 - m + m^2/2) / (1 - m0 + m0^2/2))
///
/// Equals zero at m = m0. The bound is tight for posteriors above the prior;
/// see the check suites for the verified regime.
pub fn kl_binomial_bound<F: Scalar>(m: F, m0: F) -> Result<F> {
    let lo = F::from_f64_c(M_GUARD);
    let hi = F::from_f64_c(0.5);
    for (name, v) in [("m", m), ("m0", m0)] {
        if v < lo || v >= hi {
            return Err(Error::Domain(format!(
                "kl_binomial_bound: {name} = {v} outside [{M_GUARD}, 0.5)"
            )));
        }
    }
    let one = F::one();
    let half = F::from_f64_c(0.5);
    let a = one - m + m * m * half;
    let a0 = one - m0 + m0 * m0 * half;
    Ok(m * (m.ln() - m0.ln()) + (one - m) * (a.ln() - a0.ln()))
}

/// KL divergence between N(mu, sigma_sq) and N(mu0, sigma0_sq):
///
///   1/2 ln(sigma0_sq / sigma_sq) + (sigma_sq + (mu - mu0)^2) / (2 sigma0_sq) - 1/2
pub fn kl_gaussian<F: Scalar>(mu: F, sigma_sq: F, mu0: F, sigma0_sq: F) -> Result<F> {
    if sigma_sq <= F::zero() || sigma0_sq <= F::zero() {
        return Err(Error::Domain(format!(
            "kl_gaussian: non-positive variance ({sigma_sq}, {sigma0_sq})"
        )));
    }
    let half = F::from_f64_c(0.5);
    let two = F::from_f64_c(2.0);
    let d = mu - mu0;
    Ok((sigma0_sq.ln() - sigma_sq.ln()) * half + (sigma_sq + d * d) / (sigma0_sq * two) - half)
}

/// Per-time-step KL decomposition across the edge set.
#[derive(Debug, Clone, PartialEq)]
pub struct KlReport<F> {
    pub per_edge_binomial: Vec<F>,
    pub per_edge_gaussian: Vec<F>,
    pub binomial_total: F,
    pub gaussian_total: F,
}

impl<F: Scalar> KlReport<F> {
    pub fn total(&self) -> F {
        self.binomial_total + self.gaussian_total
    }
}

/// Sum of the Binomial bound and the Gaussian KL over matching edge sets.
pub fn kl_step<F: Scalar>(
    posterior: &EdgePosterior<F>,
    prior: &EdgePrior<F>,
) -> Result<KlReport<F>> {
    if posterior.edge_count() != prior.edge_count() {
        return Err(Error::shape(
            "kl_step edge sets",
            posterior.edge_count(),
            prior.edge_count(),
        ));
    }
    let e = posterior.edge_count();
    let mut per_bin = Vec::with_capacity(e);
    let mut per_gauss = Vec::with_capacity(e);
    for k in 0..e {
        per_bin.push(kl_binomial_bound(posterior.m[k], prior.m0[k])?);
        per_gauss.push(kl_gaussian(
            posterior.mu[k],
            posterior.sigma_sq[k],
            prior.mu0[k],
            prior.sigma0_sq[k],
        )?);
    }
    let binomial_total = per_bin.iter().cloned().sum();
    let gaussian_total = per_gauss.iter().cloned().sum();
    Ok(KlReport {
        per_edge_binomial: per_bin,
        per_edge_gaussian: per_gauss,
        binomial_total,
        gaussian_total,
    })
}

/// total = ctc_term + beta * sum of per-step KL totals.
pub fn total_loss<F: Scalar>(ctc_term: F, kl_step_totals: &[F], beta: F) -> Result<F> {
    if beta < F::zero() {
        return Err(Error::Config(format!("beta must be >= 0, got {beta}")));
    }
    let kl: F = kl_step_totals.iter().cloned().sum();
    Ok(ctc_term + beta * kl)
}

/// Differentiable per-step KL total on the tape, same formulas as the scalar
/// closed forms, summed over edges.
pub fn kl_step_on<F: Scalar>(tape: &mut Tape<F>, dist: &EdgeDistVars) -> Var {
    let half = F::from_f64_c(0.5);
    let one = F::one();
    let two = F::from_f64_c(2.0);

    // Binomial bound: m (ln m - ln m0) + (1 - m)(ln a - ln a0)
    let ln_m = tape.ln(dist.m);
    let ln_m0 = tape.ln(dist.m0);
    let dln = tape.sub(ln_m, ln_m0);
    let first = tape.mul(dist.m, dln);
    let a = binomial_tail_on(tape, dist.m);
    let a0 = binomial_tail_on(tape, dist.m0);
    let ln_a = tape.ln(a);
    let ln_a0 = tape.ln(a0);
    let dln_a = tape.sub(ln_a, ln_a0);
    let neg_m = tape.neg(dist.m);
    let one_minus_m = tape.add_scalar(neg_m, one);
    let second = tape.mul(one_minus_m, dln_a);
    let bin = tape.add(first, second);

    // Gaussian KL: (ln s0 - ln s)/2 + (s + (mu - mu0)^2) / (2 s0) - 1/2
    let ln_s0 = tape.ln(dist.sigma0_sq);
    let ln_s = tape.ln(dist.sigma_sq);
    let dls = tape.sub(ln_s0, ln_s);
    let t1 = tape.mul_scalar(dls, half);
    let dmu = tape.sub(dist.mu, dist.mu0);
    let dmu_sq = tape.mul(dmu, dmu);
    let num = tape.add(dist.sigma_sq, dmu_sq);
    let den = tape.mul_scalar(dist.sigma0_sq, two);
    let frac = tape.div(num, den);
    let t12 = tape.add(t1, frac);
    let gauss = tape.add_scalar(t12, -half);

    let per_edge = tape.add(bin, gauss);
    tape.sum(per_edge)
}

/// 1 - m + m^2 / 2 on the tape.
fn binomial_tail_on<F: Scalar>(tape: &mut Tape<F>, m: Var) -> Var {
    let msq = tape.mul(m, m);
    let half_msq = tape.mul_scalar(msq, F::from_f64_c(0.5));
    let neg_m = tape.neg(m);
    let tail = tape.add(neg_m, half_msq);
    tape.add_scalar(tail, F::one())
}
