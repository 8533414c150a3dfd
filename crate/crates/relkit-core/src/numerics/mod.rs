//! Differentiable computation: tensors, a reverse-mode tape, standard layers,
//! seeded sampling, and the finite-difference gradient oracle.

pub mod gradcheck;
pub mod mlp;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use gradcheck::finite_diff_check;
pub use rng::RngStream;
pub use tape::{Tape, Var};
pub use tensor::Tensor;

use num_traits::{Float, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Scalar type the core math is generic over. Implemented by `f32` and `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Cast an `f64` constant into this scalar type.
    fn from_f64_c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant not representable")
    }

    /// Widen to `f64` for reporting and file formats.
    fn to_f64_c(self) -> f64 {
        num_traits::cast::<Self, f64>(self).expect("scalar not castable to f64")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
}

/// Numerically stable softmax along contiguous rows of length `row_len`.
///
/// The maximum of each row is subtracted before exponentiation, so constant
/// offsets (including large ones) cancel exactly.
pub fn softmax_rows<F: Scalar>(values: &[F], row_len: usize) -> crate::Result<Vec<F>> {
    if row_len == 0 || !values.len().is_multiple_of(row_len) {
        return Err(crate::Error::shape(
            "softmax",
            format!("length divisible by row_len {row_len}"),
            values.len(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(crate::Error::Numeric(
            "softmax input contains non-finite values".into(),
        ));
    }
    let mut out = Vec::with_capacity(values.len());
    for row in values.chunks(row_len) {
        let max = row.iter().cloned().fold(F::neg_infinity(), F::max);
        let exps: Vec<F> = row.iter().map(|&v| (v - max).exp()).collect();
        let total: F = exps.iter().cloned().sum();
        out.extend(exps.into_iter().map(|e| e / total));
    }
    Ok(out)
}

/// Stable softmax of a single vector.
pub fn softmax<F: Scalar>(values: &[F]) -> crate::Result<Vec<F>> {
    softmax_rows(values, values.len().max(1))
}

/// log(exp(a) + exp(b)) without overflow; handles -inf endpoints.
pub fn log_add_exp<F: Scalar>(a: F, b: F) -> F {
    if a == F::neg_infinity() {
        return b;
    }
    if b == F::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn softmax_symmetric_pair() {
        let out = softmax(&[0.0_f64, 0.0]).unwrap();
        assert_close(out[0], 0.5, 1e-15);
        assert_close(out[1], 0.5, 1e-15);
    }

    #[test]
    fn softmax_large_inputs_do_not_overflow() {
        let out = softmax(&[1000.0_f64, 1000.0, 1000.0]).unwrap();
        for v in &out {
            assert_close(*v, 1.0 / 3.0, 1e-15);
        }
    }

    #[test]
    fn softmax_matches_high_precision_oracle() {
        // exp-normalize of [1,2,3] evaluated at 40 decimal digits.
        let out = softmax(&[1.0_f64, 2.0, 3.0]).unwrap();
        assert_close(out[0], 0.09003057317038046, 1e-15);
        assert_close(out[1], 0.24472847105479765, 1e-15);
        assert_close(out[2], 0.6652409557748219, 1e-15);
    }

    #[test]
    fn softmax_rejects_nan() {
        assert!(matches!(
            softmax(&[f64::NAN, 0.0]),
            Err(crate::Error::Numeric(_))
        ));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let out = softmax_rows(&[0.3_f64, -1.2, 4.0, 0.0, 7.5, 7.5], 3).unwrap();
        for row in out.chunks(3) {
            let s: f64 = row.iter().sum();
            assert_close(s, 1.0, 1e-12);
            assert!(row.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let xs = [0.4_f64, -2.0, 1.7, 0.0];
        let shifted: Vec<f64> = xs.iter().map(|v| v + 123.625).collect();
        let a = softmax(&xs).unwrap();
        let b = softmax(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_close(*x, *y, 1e-12);
        }
    }

    #[test]
    fn log_add_exp_deep_negative() {
        // No overflow for log-probabilities down to -700.
        let v = log_add_exp(-700.0_f64, -700.0);
        assert_close(v, -700.0 + std::f64::consts::LN_2, 1e-12);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, -3.0), -3.0);
    }

    #[test]
    fn works_at_f32() {
        let out = softmax(&[0.0_f32, 0.0]).unwrap();
        assert!((out[0] - 0.5).abs() < 1e-6);
    }
}
