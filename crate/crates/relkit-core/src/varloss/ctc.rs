//! CTC alignment lattice: forward/backward recursions in log space and the
//! alignment-marginalizing negative log-likelihood.

use crate::numerics::{log_add_exp, Scalar};
use crate::{Error, Result};

/// Interleave blanks around every label: y -> [-, y1, -, y2, -, ..., -].
pub(crate) fn extend_with_blanks(targets: &[usize], blank: usize) -> Vec<usize> {
    let mut ext = Vec::with_capacity(2 * targets.len() + 1);
    ext.push(blank);
    for &y in targets {
        ext.push(y);
        ext.push(blank);
    }
    ext
}

/// Minimum frame count for a target: length plus one per adjacent repeat.
pub fn min_frames(targets: &[usize]) -> usize {
    targets.len() + targets.windows(2).filter(|w| w[0] == w[1]).count()
}

/// Validate targets against the class count and blank index.
pub(crate) fn validate_targets(targets: &[usize], classes: usize, blank: usize) -> Result<()> {
    if blank >= classes {
        return Err(Error::Index {
            what: "blank index".into(),
            got: blank.to_string(),
            range: format!("0..{classes}"),
        });
    }
    for &y in targets {
        if y >= classes || y == blank {
            return Err(Error::Index {
                what: "target label".into(),
                got: y.to_string(),
                range: format!("0..{classes} excluding blank {blank}"),
            });
        }
    }
    Ok(())
}

/// Forward lattice of log alpha values, row-major [frames, states].
/// `lp` is the row-major [frames, classes] log-probability matrix.
pub(crate) fn forward_lattice<F: Scalar>(
    lp: &[F],
    frames: usize,
    classes: usize,
    extended: &[usize],
    blank: usize,
) -> Vec<F> {
    let s_count = extended.len();
    let ninf = F::neg_infinity();
    let mut alpha = vec![ninf; frames * s_count];
    alpha[0] = lp[extended[0]];
    if s_count > 1 {
        alpha[1] = lp[extended[1]];
    }
    for t in 1..frames {
        for s in 0..s_count {
            let mut acc = alpha[(t - 1) * s_count + s];
            if s >= 1 {
                acc = log_add_exp(acc, alpha[(t - 1) * s_count + s - 1]);
            }
            if s >= 2 && extended[s] != blank && extended[s] != extended[s - 2] {
                acc = log_add_exp(acc, alpha[(t - 1) * s_count + s - 2]);
            }
            alpha[t * s_count + s] = acc + lp[t * classes + extended[s]];
        }
    }
    alpha
}

/// Backward lattice of log beta values (suffix mass, emission at the current
/// frame excluded), row-major [frames, states].
pub(crate) fn backward_lattice<F: Scalar>(
    lp: &[F],
    frames: usize,
    classes: usize,
    extended: &[usize],
    blank: usize,
) -> Vec<F> {
    let s_count = extended.len();
    let ninf = F::neg_infinity();
    let mut beta = vec![ninf; frames * s_count];
    beta[(frames - 1) * s_count + s_count - 1] = F::zero();
    if s_count >= 2 {
        beta[(frames - 1) * s_count + s_count - 2] = F::zero();
    }
    for t in (0..frames.saturating_sub(1)).rev() {
        for s in 0..s_count {
            let mut acc = beta[(t + 1) * s_count + s] + lp[(t + 1) * classes + extended[s]];
            if s + 1 < s_count {
                acc = log_add_exp(
                    acc,
                    beta[(t + 1) * s_count + s + 1] + lp[(t + 1) * classes + extended[s + 1]],
                );
            }
            if s + 2 < s_count && extended[s + 2] != blank && extended[s + 2] != extended[s] {
                acc = log_add_exp(
                    acc,
                    beta[(t + 1) * s_count + s + 2] + lp[(t + 1) * classes + extended[s + 2]],
                );
            }
            beta[t * s_count + s] = acc;
        }
    }
    beta
}

/// log p(y) from a forward lattice.
pub(crate) fn lattice_log_prob<F: Scalar>(alpha: &[F], frames: usize, s_count: usize) -> F {
    let mut log_p = alpha[(frames - 1) * s_count + s_count - 1];
    if s_count >= 2 {
        log_p = log_add_exp(log_p, alpha[(frames - 1) * s_count + s_count - 2]);
    }
    log_p
}

/// Per-frame class occupancies: d log p(y) / d lp[t][k]. Each frame's row
/// sums to one.
pub(crate) fn occupancy<F: Scalar>(
    lp: &[F],
    frames: usize,
    classes: usize,
    extended: &[usize],
    blank: usize,
) -> Vec<F> {
    let s_count = extended.len();
    let alpha = forward_lattice(lp, frames, classes, extended, blank);
    let beta = backward_lattice(lp, frames, classes, extended, blank);
    let log_p = lattice_log_prob(&alpha, frames, s_count);
    let ninf = F::neg_infinity();
    let mut occ = vec![F::zero(); frames * classes];
    for t in 0..frames {
        let mut per_class = vec![ninf; classes];
        for s in 0..s_count {
            let joint = alpha[t * s_count + s] + beta[t * s_count + s];
            let k = extended[s];
            per_class[k] = log_add_exp(per_class[k], joint);
        }
        for k in 0..classes {
            if per_class[k] > ninf {
                occ[t * classes + k] = (per_class[k] - log_p).exp();
            }
        }
    }
    occ
}

/// Negative log of the total probability of all frame paths collapsing to
/// `targets`: -log sum over B in F^-1(y) of prod_t p(b_t).
///
/// `frame_log_probs[t]` holds the per-class log-probabilities of frame `t`
/// (classes include the blank at index `blank`). Errors with
/// [`Error::InfeasibleAlignment`] when the target cannot fit.
pub fn ctc_neg_log_likelihood<F: Scalar>(
    frame_log_probs: &[Vec<F>],
    targets: &[usize],
    blank: usize,
) -> Result<F> {
    if frame_log_probs.is_empty() {
        return Err(Error::Config("ctc: empty frame sequence".into()));
    }
    let classes = frame_log_probs[0].len();
    for (t, row) in frame_log_probs.iter().enumerate() {
        if row.len() != classes {
            return Err(Error::shape(format!("ctc frame {t}"), classes, row.len()));
        }
    }
    validate_targets(targets, classes, blank)?;
    let frames = frame_log_probs.len();
    let needed = min_frames(targets);
    if needed > frames {
        return Err(Error::InfeasibleAlignment { needed, frames });
    }
    let lp: Vec<F> = frame_log_probs.iter().flatten().cloned().collect();
    let extended = extend_with_blanks(targets, blank);
    let alpha = forward_lattice(&lp, frames, classes, &extended, blank);
    Ok(-lattice_log_prob(&alpha, frames, extended.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn single_frame_single_label() {
        let lp = vec![vec![0.9_f64.ln(), 0.1_f64.ln()]];
        let loss = ctc_neg_log_likelihood(&lp, &[0], 1).unwrap();
        assert_close(loss, -(0.9_f64.ln()), 1e-15);
    }

    #[test]
    fn two_frames_uniform_three_paths() {
        // paths {aa, a-, -a} out of 9: p = 3/9
        let u = (1.0_f64 / 3.0).ln();
        let lp = vec![vec![u; 3]; 2];
        let loss = ctc_neg_log_likelihood(&lp, &[0], 2).unwrap();
        assert_close(loss, -(1.0_f64 / 3.0).ln(), 1e-12);
    }

    #[test]
    fn repeated_label_matches_exhaustive_enumeration() {
        let mut rng = crate::numerics::RngStream::new(61);
        let probs: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let raw: Vec<f64> = (0..3).map(|_| rng.uniform_in(0.05, 1.0)).collect();
                let total: f64 = raw.iter().sum();
                raw.iter().map(|p| (p / total).ln()).collect()
            })
            .collect();
        let loss = ctc_neg_log_likelihood(&probs, &[0, 0], 2).unwrap();
        let brute = crate::oracle::ctc_brute_force(&probs, &[0, 0], 2).unwrap();
        assert!(
            (loss - brute).abs() / brute.abs().max(1.0) < 1e-9,
            "{loss} vs {brute}"
        );
    }

    #[test]
    fn padding_with_certain_blanks_is_invariant() {
        let lp = vec![
            vec![0.6_f64.ln(), 0.3_f64.ln(), 0.1_f64.ln()],
            vec![0.2_f64.ln(), 0.5_f64.ln(), 0.3_f64.ln()],
        ];
        let base = ctc_neg_log_likelihood(&lp, &[0, 1], 2).unwrap();
        let mut padded = lp.clone();
        padded.push(vec![f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0]);
        padded.push(vec![f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0]);
        let with_pad = ctc_neg_log_likelihood(&padded, &[0, 1], 2).unwrap();
        assert_close(base, with_pad, 1e-12);
    }

    #[test]
    fn deep_log_probabilities_do_not_overflow() {
        let lp = vec![vec![-700.0_f64, -0.5], vec![-700.0, -0.5]];
        let loss = ctc_neg_log_likelihood(&lp, &[0], 1).unwrap();
        assert!(loss.is_finite());
    }

    #[test]
    fn infeasible_target_is_signaled() {
        let lp = vec![vec![(1.0_f64 / 3.0).ln(); 3]; 2];
        match ctc_neg_log_likelihood(&lp, &[0, 0], 2) {
            Err(Error::InfeasibleAlignment { needed, frames }) => {
                assert_eq!((needed, frames), (3, 2));
            }
            other => panic!("expected infeasible alignment, got {other:?}"),
        }
    }

    #[test]
    fn blank_inside_targets_is_rejected() {
        let lp = vec![vec![0.0_f64; 3]; 2];
        assert!(ctc_neg_log_likelihood(&lp, &[2], 2).is_err());
    }

    #[test]
    fn empty_target_is_the_all_blank_path() {
        let lp = vec![
            vec![0.7_f64.ln(), 0.3_f64.ln()],
            vec![0.6_f64.ln(), 0.4_f64.ln()],
        ];
        let loss = ctc_neg_log_likelihood(&lp, &[], 1).unwrap();
        assert_close(loss, -(0.3_f64 * 0.4).ln(), 1e-12);
    }
}
