//! Independent reference computations. Everything here deliberately avoids
//! the implementation paths it is used to verify: brute-force enumeration
//! instead of dynamic programming, quadrature instead of closed forms,
//! explicit loops instead of shared layer code. The check suites and the
//! verification tests compare library results against these.

use crate::attention::AttentionLayer;
use crate::numerics::mlp::{Activation, Mlp};
use crate::numerics::Scalar;
use crate::{Error, Result};

/// MLP forward pass re-derived with explicit index loops from the layer
/// tensors (tanh on hidden layers, linear output).
pub fn mlp_forward_loops<F: Scalar>(net: &Mlp<F>, input: &[F]) -> Vec<F> {
    let mut h: Vec<F> = input.to_vec();
    for l in 0..net.layer_count() {
        let w = net.weight(l);
        let b = net.bias(l);
        let mut next = vec![F::zero(); w.rows()];
        for (i, slot) in next.iter_mut().enumerate() {
            let mut acc = b.values()[i];
            for (j, &hj) in h.iter().enumerate() {
                acc += w.at(i, j) * hj;
            }
            *slot = acc;
        }
        if l + 1 < net.layer_count() && net.activation() == Activation::Tanh {
            for v in next.iter_mut() {
                *v = v.tanh();
            }
        }
        h = next;
    }
    h
}

/// Self-attention on a window via explicit scalar loops.
pub fn self_attention_loops<F: Scalar>(window: &[Vec<F>], layer: &AttentionLayer<F>) -> Vec<F> {
    let w = window.len();
    let d_k = layer.w_k.rows();
    let mv = |m: &crate::numerics::tensor::Tensor<F>, x: &[F]| {
        let mut out = vec![F::zero(); m.rows()];
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                out[i] += m.at(i, j) * x[j];
            }
        }
        out
    };
    let queries: Vec<Vec<F>> = window.iter().map(|h| mv(&layer.w_q, h)).collect();
    let keys: Vec<Vec<F>> = window.iter().map(|h| mv(&layer.w_k, h)).collect();
    let values: Vec<Vec<F>> = window.iter().map(|h| mv(&layer.w_v, h)).collect();
    let scale = F::one() / F::from_f64_c(d_k as f64).sqrt();
    // weights for the last row only
    let q_last = &queries[w - 1];
    let mut scores = Vec::with_capacity(w);
    for k in &keys {
        let mut s = F::zero();
        for (a, b) in k.iter().zip(q_last) {
            s += *a * *b;
        }
        scores.push(s * scale);
    }
    let max = scores.iter().cloned().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: F = exps.iter().cloned().sum();
    let mut out = vec![F::zero(); layer.w_v.rows()];
    for (e, v) in exps.iter().zip(&values) {
        let a = *e / total;
        for (acc, &x) in out.iter_mut().zip(v) {
            *acc += a * x;
        }
    }
    out
}

/// Merge duplicate runs, then drop blanks (the oracle's own copy).
fn collapse_path(path: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev: Option<usize> = None;
    for &p in path {
        if Some(p) != prev {
            if p != blank {
                out.push(p);
            }
            prev = Some(p);
        }
    }
    out
}

/// CTC loss by exhaustive path enumeration in probability space:
/// -ln sum over all classes^T paths whose collapse equals `targets`.
pub fn ctc_brute_force<F: Scalar>(
    frame_log_probs: &[Vec<F>],
    targets: &[usize],
    blank: usize,
) -> Result<F> {
    let frames = frame_log_probs.len();
    let classes = frame_log_probs[0].len();
    let mut total = 0.0_f64;
    let mut path = vec![0usize; frames];
    let count = (classes as u64).pow(frames as u32);
    for code in 0..count {
        let mut c = code;
        for slot in path.iter_mut() {
            *slot = (c % classes as u64) as usize;
            c /= classes as u64;
        }
        if collapse_path(&path, blank) == targets {
            let mut p = 1.0_f64;
            for (t, &k) in path.iter().enumerate() {
                p *= frame_log_probs[t][k].to_f64_c().exp();
            }
            total += p;
        }
    }
    if total <= 0.0 {
        return Err(Error::InfeasibleAlignment {
            needed: targets.len(),
            frames,
        });
    }
    Ok(F::from_f64_c(-total.ln()))
}

/// KL divergence between two univariate Gaussians by Simpson quadrature of
/// q(x) (ln q(x) - ln p(x)) over a 15-sigma-wide bracket.
pub fn kl_gaussian_quadrature(mu: f64, sigma_sq: f64, mu0: f64, sigma0_sq: f64) -> f64 {
    let sq = sigma_sq.sqrt();
    let sp = sigma0_sq.sqrt();
    let lo = (mu - 15.0 * sq).min(mu0 - 15.0 * sp);
    let hi = (mu + 15.0 * sq).max(mu0 + 15.0 * sp);
    let n = 40_000; // even
    let h = (hi - lo) / n as f64;
    let ln_norm_q = -0.5 * (2.0 * std::f64::consts::PI * sigma_sq).ln();
    let ln_norm_p = -0.5 * (2.0 * std::f64::consts::PI * sigma0_sq).ln();
    let integrand = |x: f64| {
        let lq = ln_norm_q - (x - mu) * (x - mu) / (2.0 * sigma_sq);
        let lp = ln_norm_p - (x - mu0) * (x - mu0) / (2.0 * sigma0_sq);
        lq.exp() * (lq - lp)
    };
    let mut acc = integrand(lo) + integrand(hi);
    for i in 1..n {
        let x = lo + h * i as f64;
        acc += integrand(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// Exact KL divergence between B(n, m/n) and B(n, m0/n) by direct summation
/// over all n+1 outcomes, with incrementally updated log binomial
/// coefficients.
pub fn kl_binomial_exact(m: f64, m0: f64, n: u64) -> f64 {
    let p = m / n as f64;
    let q = m0 / n as f64;
    let lr_hit = (p / q).ln();
    let lr_miss = ((1.0 - p) / (1.0 - q)).ln();
    let ln_p = p.ln();
    let ln_1p = (1.0 - p).ln();
    let mut log_coeff = 0.0_f64;
    let mut total = 0.0_f64;
    for k in 0..=n {
        let kf = k as f64;
        let log_pmf = log_coeff + kf * ln_p + (n - k) as f64 * ln_1p;
        let pmf = log_pmf.exp();
        if pmf > 0.0 {
            total += pmf * (kf * lr_hit + (n - k) as f64 * lr_miss);
        }
        if k < n {
            log_coeff += ((n - k) as f64 / (kf + 1.0)).ln();
        }
    }
    total
}

/// Edit distance by the exponential recursive definition (short inputs only).
pub fn edit_distance_recursive<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let cost = usize::from(a[0] != b[0]);
    let del = edit_distance_recursive(&a[1..], b) + 1;
    let ins = edit_distance_recursive(a, &b[1..]) + 1;
    let sub = edit_distance_recursive(&a[1..], &b[1..]) + cost;
    del.min(ins).min(sub)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_matches_known_gaussian_kl() {
        // KL(N(1,1) || N(0,1)) = 1/2
        let got = kl_gaussian_quadrature(1.0, 1.0, 0.0, 1.0);
        assert!((got - 0.5).abs() < 1e-9, "{got}");
    }

    #[test]
    fn binomial_exact_matches_poisson_limit() {
        // for n -> inf, KL -> m ln(m/m0) + m0 - m
        let (m, m0) = (0.3, 0.1);
        let got = kl_binomial_exact(m, m0, 100_000);
        let poisson = m * (m / m0).ln() + m0 - m;
        assert!((got - poisson).abs() < 1e-4, "{got} vs {poisson}");
    }

    #[test]
    fn recursive_edit_distance_on_known_pair() {
        let a: Vec<char> = "kitten".chars().collect();
        let b: Vec<char> = "sittin".chars().collect();
        assert_eq!(edit_distance_recursive(&a, &b), 2);
    }

    #[test]
    fn brute_force_ctc_counts_paths() {
        // uniform over {a, b, -}, T=2, y=[a]: 3 paths of 9
        let u = (1.0_f64 / 3.0).ln();
        let lp = vec![vec![u; 3]; 2];
        let got = ctc_brute_force(&lp, &[0], 2).unwrap();
        assert!((got + (1.0_f64 / 3.0).ln()).abs() < 1e-12);
    }
}
