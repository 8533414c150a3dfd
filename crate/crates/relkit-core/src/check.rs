//! Named verification suites comparing library results against the
//! independent oracles. The CLI `check` command runs all of them; the
//! acceptance tests reuse the same functions.

use crate::attention::{stacked_attention_identity, AttentionLayer};
use crate::decode::edit_distance;
use crate::featuremap::{partition_grid, FeatureSequence, FilterSpec, Resolution};
use crate::features::synth::{generate_corpus, SyntheticSpec};
use crate::harness::config::ModelConfig;
use crate::harness::model::{Model, NoiseSource};
use crate::numerics::mlp::{Activation, Mlp};
use crate::numerics::tape::Tape;
use crate::numerics::tensor::Tensor;
use crate::numerics::{finite_diff_check, softmax, RngStream};
use crate::relgraph::{
    self, build_task_graph, gaussian_proxy_m, graph_embed, proxy_residual, sample_summary_edge,
    sample_transformation, EdgePosterior, GraphNoise,
};
use crate::varloss::{ctc_neg_log_likelihood, kl_binomial_bound, kl_gaussian};
use crate::{oracle, Result};

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

impl CheckOutcome {
    fn pass(name: &'static str, details: String) -> Self {
        CheckOutcome {
            name,
            passed: true,
            details,
        }
    }

    fn fail(name: &'static str, details: String) -> Self {
        CheckOutcome {
            name,
            passed: false,
            details,
        }
    }
}

fn outcome(name: &'static str, result: Result<String>) -> CheckOutcome {
    match result {
        Ok(details) => CheckOutcome::pass(name, details),
        Err(e) => CheckOutcome::fail(name, e.to_string()),
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(crate::Error::Numeric(msg()))
    }
}

/// Every check suite, in execution order.
pub fn run_all() -> Vec<CheckOutcome> {
    vec![
        check_gaussian_proxy_grid(),
        check_kl_gaussian_quadrature(),
        check_kl_binomial_bound(),
        check_ctc_enumeration(),
        check_gradient_integrity(),
        check_shape_contract(),
        check_stacked_attention(),
        check_edit_metric(),
        check_numerics_oracles(),
        check_featuremap_partition(),
        check_sampling_moments(),
        check_embedding_linearity(),
        check_generator_frequencies(),
        check_mfcc_frontend(),
    ]
}

/// Proxy-mean correctness on a 50x50 grid: quadratic residual below 1e-10,
/// m in [0, 1/2), strictly increasing in the variance.
pub fn check_gaussian_proxy_grid() -> CheckOutcome {
    outcome(
        "gaussian-proxy-grid",
        (|| {
            let mut worst_residual = 0.0_f64;
            for i in 0..50 {
                let mu = -0.4 + (0.45 + 0.4) * i as f64 / 49.0;
                let mut prev = -1.0_f64;
                for j in 0..50 {
                    let s2 = 1e-4 + (0.25 - 1e-4) * j as f64 / 49.0;
                    let m = gaussian_proxy_m(mu, s2)?;
                    ensure((0.0..0.5).contains(&m), || format!("m {m} out of range"))?;
                    ensure(m > prev, || format!("not monotone at mu={mu}, s2={s2}"))?;
                    let r = proxy_residual(mu, s2, m).abs();
                    worst_residual = worst_residual.max(r);
                    prev = m;
                }
            }
            ensure(worst_residual < 1e-10, || {
                format!("residual {worst_residual} >= 1e-10")
            })?;
            Ok(format!(
                "2500 grid points, max residual {worst_residual:.3e}"
            ))
        })(),
    )
}

/// Gaussian KL closed form vs Simpson quadrature on 100 random tuples.
pub fn check_kl_gaussian_quadrature() -> CheckOutcome {
    outcome(
        "kl-gaussian-quadrature",
        (|| {
            let mut rng = RngStream::new(2001);
            let mut worst = 0.0_f64;
            for _ in 0..100 {
                let mu = rng.uniform_in(-2.0, 2.0);
                let s2 = rng.uniform_in(0.05, 3.0);
                let mu0 = rng.uniform_in(-2.0, 2.0);
                let s02 = rng.uniform_in(0.05, 3.0);
                let closed = kl_gaussian(mu, s2, mu0, s02)?;
                let quad = oracle::kl_gaussian_quadrature(mu, s2, mu0, s02);
                worst = worst.max((closed - quad).abs());
            }
            ensure(worst < 1e-6, || {
                format!("max |closed - quadrature| = {worst}")
            })?;
            Ok(format!("100 tuples, max abs deviation {worst:.3e}"))
        })(),
    )
}

/// Binomial bound: zero at m = m0, and an upper bound on the exact
/// divergence (direct summation at n = 1e5) for 50 random pairs with the
/// posterior mean above the prior mean.
pub fn check_kl_binomial_bound() -> CheckOutcome {
    outcome(
        "kl-binomial-bound",
        (|| {
            ensure(kl_binomial_bound(0.2, 0.2)? == 0.0, || {
                "bound not zero at m = m0".into()
            })?;
            let mut rng = RngStream::new(2002);
            let mut min_gap = f64::INFINITY;
            for _ in 0..50 {
                let a = rng.uniform_in(0.01, 0.49);
                let b = rng.uniform_in(0.01, 0.49);
                let (m, m0) = if a > b { (a, b) } else { (b, a) };
                if m == m0 {
                    continue;
                }
                let bound = kl_binomial_bound(m, m0)?;
                let exact = oracle::kl_binomial_exact(m, m0, 100_000);
                min_gap = min_gap.min(bound - exact);
                ensure(bound >= exact - 1e-12, || {
                    format!("bound {bound} below exact {exact} at m={m}, m0={m0}")
                })?;
            }
            Ok(format!(
                "50 pairs (m > m0), min bound-exact gap {min_gap:.3e}"
            ))
        })(),
    )
}

/// CTC dynamic program vs exhaustive path enumeration for every
/// (T <= 6, |vocab| <= 3, |y| <= 3) shape with random probabilities.
pub fn check_ctc_enumeration() -> CheckOutcome {
    outcome(
        "ctc-enumeration",
        (|| {
            let mut rng = RngStream::new(2003);
            let mut cases = 0usize;
            let mut worst = 0.0_f64;
            for frames in 1..=6usize {
                for vocab in 1..=3usize {
                    for target_len in 0..=3usize {
                        // random log-probabilities over vocab + blank
                        let classes = vocab + 1;
                        let lp: Vec<Vec<f64>> = (0..frames)
                            .map(|_| {
                                let raw: Vec<f64> =
                                    (0..classes).map(|_| rng.uniform_in(0.05, 1.0)).collect();
                                let total: f64 = raw.iter().sum();
                                raw.iter().map(|p| (p / total).ln()).collect()
                            })
                            .collect();
                        let targets: Vec<usize> =
                            (0..target_len).map(|_| rng.below(vocab)).collect();
                        if crate::varloss::ctc::min_frames(&targets) > frames {
                            continue;
                        }
                        let got = ctc_neg_log_likelihood(&lp, &targets, vocab)?;
                        let brute = oracle::ctc_brute_force(&lp, &targets, vocab)?;
                        let rel = (got - brute).abs() / brute.abs().max(1e-300);
                        worst = worst.max(rel);
                        cases += 1;
                        ensure(rel < 1e-9, || {
                            format!("T={frames} V={vocab} y={targets:?}: rel err {rel}")
                        })?;
                    }
                }
            }
            Ok(format!("{cases} cases, max relative error {worst:.3e}"))
        })(),
    )
}

/// Central-difference verification of the end-to-end gradient of a tiny
/// model (every trainable parameter group, frozen sampling noise).
pub fn check_gradient_integrity() -> CheckOutcome {
    outcome(
        "gradient-integrity",
        (|| {
            let err = tiny_model_gradient_error()?;
            ensure(err < 1e-3, || format!("max relative error {err}"))?;
            Ok(format!("max relative error {err:.3e} over all parameters"))
        })(),
    )
}

/// Max relative gradient error of the tiny end-to-end model.
pub fn tiny_model_gradient_error() -> Result<f64> {
    let config = ModelConfig {
        feature_dim: 8,
        window: 6,
        kernel_width: 3,
        kernel_stride: 1,
        res_time: 2,
        res_freq: 2,
        embed_dim: 4,
        hidden_width: 6,
        beta: 0.7,
        seed: 424,
        ..ModelConfig::default()
    };
    let class_count = 3;
    let model = Model::new(config, class_count)?;
    let mut rng = RngStream::new(31);
    let t_len = 3;
    let frames: Vec<Vec<f64>> = (0..t_len)
        .map(|_| (0..8).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
        .collect();
    let features = FeatureSequence::new(8, frames)?;
    let targets = vec![0usize, 1];
    let edges = model.edge_count();
    // Noise amplitudes kept moderate so every sampled weight stays strictly
    // inside the clamp interval (asserted below); at a rail the loss is not
    // differentiable and central differences would be meaningless.
    let mut noise_rng = RngStream::new(77);
    let frozen: Vec<GraphNoise<f64>> = (0..t_len)
        .map(|_| GraphNoise {
            gamma: (0..edges)
                .map(|_| noise_rng.uniform_in(-0.35, 0.35))
                .collect(),
            gamma_prime: (0..edges)
                .map(|_| noise_rng.uniform_in(-0.8, 0.8))
                .collect(),
        })
        .collect();

    // base forward: analytic gradient and rail check
    let mut tape = Tape::new();
    let vars = model.register(&mut tape);
    let (loss, _, traces) = model.utterance_loss(
        &mut tape,
        &vars,
        &features,
        &targets,
        0.7,
        &mut NoiseSource::Frozen(&frozen),
    )?;
    for tr in &traces {
        for &a in &tr.alpha_tilde {
            ensure(a > 0.02 && a < 0.98, || {
                format!("sampled alpha {a} too close to a clamp rail for finite differences")
            })?;
        }
    }
    let grads = tape.backward(loss);
    let grad_tensors = model.collect_grads(&grads, &vars);
    let flat_grad: Vec<f64> = grad_tensors
        .iter()
        .flat_map(|t| t.values().iter().copied())
        .collect();
    let flat_params: Vec<f64> = model
        .params()
        .iter()
        .flat_map(|t| t.values().iter().copied())
        .collect();

    let features_ref = &features;
    let targets_ref = &targets;
    let frozen_ref = &frozen;
    let base_model = &model;
    let loss_fn = |theta: &[f64]| -> Result<f64> {
        let mut m = base_model.clone();
        let mut offset = 0;
        for p in m.params_mut() {
            let n = p.len();
            p.values_mut().copy_from_slice(&theta[offset..offset + n]);
            offset += n;
        }
        let mut tape = Tape::new();
        let vars = m.register(&mut tape);
        let (loss, _, _) = m.utterance_loss(
            &mut tape,
            &vars,
            features_ref,
            targets_ref,
            0.7,
            &mut NoiseSource::Frozen(frozen_ref),
        )?;
        Ok(tape.scalar_value(loss))
    };
    finite_diff_check(loss_fn, &flat_params, &flat_grad, 1e-5)
}

/// Reference-geometry shape contract: w=20, kernel 5, stride 2 gives 8
/// nodes and 28 edges; r has the configured dimension and the concatenated
/// representation has dimension D_c + 32 (800 at D_c = 768).
pub fn check_shape_contract() -> CheckOutcome {
    outcome(
        "shape-contract",
        (|| {
            let config = ModelConfig {
                feature_dim: 768,
                window: 20,
                kernel_width: 5,
                kernel_stride: 2,
                res_time: 2,
                res_freq: 4,
                embed_dim: 32,
                hidden_width: 16,
                seed: 5,
                ..ModelConfig::default()
            };
            ensure(config.filtered_width()? == 8, || {
                "filtered width != 8".into()
            })?;
            ensure(config.node_count() == 8, || "node count != 8".into())?;
            ensure(relgraph::edge_count(config.node_count()) == 28, || {
                "edge count != 28".into()
            })?;
            let model = Model::new(config, 4)?;
            ensure(model.edge_count() == 28, || "model edge count != 28".into())?;
            let mut rng = RngStream::new(6);
            let frames: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..768).map(|_| rng.uniform_in(-0.5, 0.5)).collect())
                .collect();
            let features = FeatureSequence::new(768, frames)?;
            let ctil = model.forward_step(&features, 2, &mut NoiseSource::Mean)?;
            ensure(ctil.len() == 800, || {
                format!("dim(c~) = {} != 800", ctil.len())
            })?;
            Ok("u=8, 28 edges, dim(r)=32, dim(c~)=800 at D_c=768".to_string())
        })(),
    )
}

/// The two-layer attention expansion is exact algebra: 100 random
/// instances agree to 1e-12.
pub fn check_stacked_attention() -> CheckOutcome {
    outcome(
        "stacked-attention",
        (|| {
            let mut rng = RngStream::new(2006);
            let mut worst = 0.0_f64;
            for _ in 0..100 {
                let dim = 2 + rng.below(3);
                let mut mat = |r: usize, c: usize| {
                    Tensor::matrix(
                        r,
                        c,
                        (0..r * c).map(|_| rng.uniform_in(-1.0, 1.0)).collect(),
                    )
                    .unwrap()
                };
                let l1 = AttentionLayer::new(mat(dim, dim), mat(dim, dim), mat(dim, dim))?;
                let l2 = AttentionLayer::new(mat(dim, dim), mat(dim, dim), mat(dim, dim))?;
                let h1: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-1.5, 1.5)).collect();
                let h2: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-1.5, 1.5)).collect();
                let out = stacked_attention_identity(&h1, &h2, &[l1, l2])?;
                worst = worst.max(out.max_abs_diff);
                ensure(out.max_abs_diff < 1e-12, || {
                    format!("expansion diff {}", out.max_abs_diff)
                })?;
            }
            Ok(format!("100 instances, max abs diff {worst:.3e}"))
        })(),
    )
}

/// Edit-distance metric properties on 10^4 random triples, plus the
/// vowel-extraction reference example.
pub fn check_edit_metric() -> CheckOutcome {
    outcome(
        "edit-metric",
        (|| {
            let mut rng = RngStream::new(2007);
            for _ in 0..10_000 {
                let mut seq =
                    || -> Vec<usize> { (0..rng.below(8)).map(|_| rng.below(4)).collect() };
                let (a, b, c) = (seq(), seq(), seq());
                let dab = edit_distance(&a, &b);
                ensure(dab == edit_distance(&b, &a), || "asymmetry".into())?;
                ensure(edit_distance(&a, &a) == 0, || {
                    "nonzero self distance".into()
                })?;
                ensure(dab != 0 || a == b, || "zero distance for distinct".into())?;
                ensure(dab <= edit_distance(&a, &c) + edit_distance(&c, &b), || {
                    "triangle inequality violated".into()
                })?;
            }
            let rows = [
                ("w", "mixed"),
                ("ix", "vowel"),
                ("dcl", "sil"),
                ("s", "fricative"),
                ("ah", "vowel"),
                ("tcl", "sil"),
                ("ch", "affricate"),
                ("n", "nasal"),
                ("ae", "vowel"),
            ];
            let alphabet = crate::decode::LabelAlphabet::new(
                rows.iter()
                    .map(|(n, g)| (n.to_string(), n.to_string(), g.to_string()))
                    .collect(),
            )?;
            let seq: Vec<usize> = ["w", "ix", "dcl", "s", "ah", "tcl", "ch", "ix", "n", "ae"]
                .iter()
                .map(|s| alphabet.class_of(s).unwrap())
                .collect();
            let vowels = crate::decode::extract_group_subsequence(&seq, "vowel", &alphabet)?;
            let names: Vec<&str> = vowels.iter().map(|&c| alphabet.train_label(c)).collect();
            ensure(names == ["ix", "ah", "ix", "ae"], || {
                format!("vowel extraction gave {names:?}")
            })?;
            Ok("10000 triples pass metric laws; vowel example reproduced".to_string())
        })(),
    )
}

/// Numerics oracle bundle: MLP vs explicit loops, softmax vs extended
/// precision, sampling moments, corrupted-gradient detection.
pub fn check_numerics_oracles() -> CheckOutcome {
    outcome(
        "numerics-oracles",
        (|| {
            let mut rng = RngStream::new(2024);
            let net = Mlp::<f64>::new(&[3, 128, 2], Activation::Tanh, &mut rng);
            let input = [0.25, -0.75, 1.5];
            let got = net.forward(&input)?;
            let expect = oracle::mlp_forward_loops(&net, &input);
            for (g, e) in got.iter().zip(&expect) {
                ensure((g - e).abs() < 1e-13, || "mlp loop oracle mismatch".into())?;
            }

            let sm = softmax(&[1.0_f64, 2.0, 3.0])?;
            let reference = [0.09003057317038046, 0.24472847105479765, 0.6652409557748219];
            for (g, e) in sm.iter().zip(&reference) {
                ensure((g - e).abs() < 1e-15, || "softmax oracle mismatch".into())?;
            }

            let mut rng = RngStream::new(7);
            let n = 100_000;
            let xs: Vec<f64> = rng.normals(n);
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            ensure(mean.abs() < 0.02 && (var - 1.0).abs() < 0.02, || {
                format!("normal moments off: mean {mean}, var {var}")
            })?;

            let params: Vec<f64> = vec![1.5, -2.0, 0.7];
            let corrupted: Vec<f64> = params.iter().map(|x| 2.0 * x * 1.1).collect();
            let err = finite_diff_check(
                |x| Ok(x.iter().map(|v| v * v).sum::<f64>()),
                &params,
                &corrupted,
                1e-4,
            )?;
            ensure((err - 0.1).abs() < 0.02, || {
                format!("fault injection not detected: err {err}")
            })?;
            Ok("mlp loops, softmax precision, normal moments, fault detection".to_string())
        })(),
    )
}

/// Feature-map partition oracle: exhaustive width formula and bit-exact
/// reassembly.
pub fn check_featuremap_partition() -> CheckOutcome {
    outcome(
        "featuremap-partition",
        (|| {
            for w in 1..=64usize {
                for k in 1..=w {
                    for s in 1..=8usize {
                        let spec = FilterSpec::new(k, s)?;
                        ensure(spec.output_width(w)? == (w - k) / s + 1, || {
                            format!("width formula broke at ({w}, {k}, {s})")
                        })?;
                    }
                }
            }
            let values: Vec<f64> = (0..48).map(|i| (i as f64 * 0.37).sin()).collect();
            let filtered = Tensor::matrix(6, 8, values)?;
            for (t, f) in [(1usize, 1usize), (2, 2), (4, 3), (8, 6), (1, 6), (8, 1)] {
                if 8 % t != 0 || 6 % f != 0 {
                    continue;
                }
                let grid = partition_grid(&filtered, Resolution::new(t, f))?;
                ensure(grid.reassemble() == filtered, || {
                    format!("reassembly not bit-exact at ({t}, {f})")
                })?;
            }
            Ok("width formula exhaustive to w=64; reassembly bit-exact".to_string())
        })(),
    )
}

/// Moment-matching oracles for the two reparameterized samplers.
pub fn check_sampling_moments() -> CheckOutcome {
    outcome(
        "sampling-moments",
        (|| {
            let n = 100_000;
            let m = 0.2_f64;
            let mut rng = RngStream::new(17);
            let draws: Vec<f64> = (0..n)
                .map(|_| sample_summary_edge(m, rng.next_normal::<f64>()).raw)
                .collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            ensure((mean - 0.2).abs() < 0.004, || {
                format!("summary mean {mean}")
            })?;
            ensure((var - 0.16).abs() < 0.16 * 0.02, || {
                format!("summary var {var}")
            })?;

            let mut rng = RngStream::new(23);
            let draws: Vec<f64> = (0..n)
                .map(|_| sample_transformation(0.5, 2.0, 1.0, rng.next_normal::<f64>()))
                .collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            ensure((mean - 1.0).abs() < 0.02, || {
                format!("transform mean {mean}")
            })?;
            ensure((var - 0.5).abs() < 0.5 * 0.02, || {
                format!("transform var {var}")
            })?;
            Ok("summary: mean 0.2 var 0.16; transform: mean 1.0 var 0.5 (within 2%)".to_string())
        })(),
    )
}

/// The graph embedding is exactly linear in the edge weights: a random
/// reweighting equals the weighted sum of per-edge contributions.
pub fn check_embedding_linearity() -> CheckOutcome {
    outcome(
        "embedding-linearity",
        (|| {
            let mut rng = RngStream::new(2010);
            let filtered =
                Tensor::matrix(6, 4, (0..24).map(|_| rng.uniform_in(-1.0, 1.0)).collect())?;
            let grid = partition_grid(&filtered, Resolution::new(2, 3))?;
            let embedder = Mlp::new(&[2 * grid.node_dim(), 10, 8], Activation::Tanh, &mut rng);
            let e = relgraph::edge_count(6);
            let post = EdgePosterior::new(
                6,
                (0..e).map(|_| rng.uniform_in(-0.2, 0.4)).collect(),
                (0..e).map(|_| rng.uniform_in(0.01, 0.2)).collect(),
                (0..e).map(|_| rng.uniform_in(-1.0, 1.0)).collect(),
                (0..e).map(|_| rng.uniform_in(0.1, 1.0)).collect(),
            )?;
            let mut rng2 = RngStream::new(2011);
            let graph = build_task_graph(&post, &mut rng2);
            let r = graph_embed(&grid, &graph, &embedder)?;
            // superposition: r equals the sum of single-edge embeddings
            let mut reconstructed = vec![0.0_f64; r.len()];
            for k in 0..e {
                let mut single = graph.clone();
                for (i, v) in single.alpha_bar.iter_mut().enumerate() {
                    *v = if i == k { graph.alpha_bar[k] } else { 0.0 };
                }
                let contrib = graph_embed(&grid, &single, &embedder)?;
                for (acc, c) in reconstructed.iter_mut().zip(&contrib) {
                    *acc += c;
                }
            }
            let mut worst = 0.0_f64;
            for (a, b) in r.iter().zip(&reconstructed) {
                worst = worst.max((a - b).abs());
            }
            ensure(worst < 1e-12, || format!("superposition residual {worst}"))?;
            // random projection equality: <r, z> responds linearly to scaling
            let z: Vec<f64> = (0..r.len()).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
            let dot = |v: &[f64]| v.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
            let mut scaled = graph.clone();
            for v in scaled.alpha_bar.iter_mut() {
                *v *= 3.0;
            }
            let r3 = graph_embed(&grid, &scaled, &embedder)?;
            ensure((dot(&r3) - 3.0 * dot(&r)).abs() < 1e-10, || {
                "random-projection linearity failed".into()
            })?;
            Ok(format!(
                "superposition residual {worst:.3e}; projection scales exactly"
            ))
        })(),
    )
}

/// With boost = 1 the generator's adjacent-pair frequencies match the
/// independent uniform baseline.
pub fn check_generator_frequencies() -> CheckOutcome {
    outcome(
        "generator-frequencies",
        (|| {
            let spec = SyntheticSpec::new(4, 3, 4, vec![(0, 1), (2, 3)], 1.0, 0.0, 42)?;
            let corpus = generate_corpus(&spec, 10_000, (5, 5), 0)?;
            let mut counts = vec![0usize; 16];
            let mut total = 0usize;
            for u in &corpus.utterances {
                for w in u.targets.windows(2) {
                    counts[w[0] * 4 + w[1]] += 1;
                    total += 1;
                }
            }
            let expect = total as f64 / 16.0;
            let mut worst = 0.0_f64;
            for &c in &counts {
                worst = worst.max((c as f64 - expect).abs() / expect);
            }
            ensure(worst < 0.1, || {
                format!("pair frequency deviates {worst:.3} from baseline")
            })?;
            Ok(format!(
                "{total} transitions, max relative deviation {worst:.3} (< 0.1)"
            ))
        })(),
    )
}

/// MFCC front-end: frame-count arithmetic, bitwise determinism, polarity
/// invariance.
pub fn check_mfcc_frontend() -> CheckOutcome {
    outcome(
        "mfcc-frontend",
        (|| {
            use crate::features::mfcc::{compute_mfcc, MfccConfig};
            use crate::features::wav::Waveform;
            let cfg = MfccConfig::default();
            for ms in (25..=2000).step_by(7) {
                let n = ms * 16;
                ensure(cfg.frame_count(n)? == (n - 400) / 320 + 1, || {
                    format!("frame count wrong at {ms} ms")
                })?;
            }
            let samples: Vec<i16> = (0..16000)
                .map(|i| {
                    (0.4 * (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 16000.0).sin()
                        * 32767.0) as i16
                })
                .collect();
            let wave = Waveform::new(samples, 16000);
            let a = compute_mfcc(&wave, &cfg)?;
            ensure(a.len() == 49, || {
                format!("1 s tone gave {} frames", a.len())
            })?;
            let b = compute_mfcc(&wave, &cfg)?;
            let flipped = Waveform::new(
                wave.samples.iter().map(|&s| s.saturating_neg()).collect(),
                16000,
            );
            let c = compute_mfcc(&flipped, &cfg)?;
            for t in 0..a.len() {
                ensure(a.frame(t) == b.frame(t), || "mfcc not deterministic".into())?;
                ensure(a.frame(t) == c.frame(t), || {
                    "mfcc not polarity invariant".into()
                })?;
            }
            Ok("49 frames per second of audio; deterministic; polarity invariant".to_string())
        })(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_suites_pass() {
        for check in [
            check_gaussian_proxy_grid(),
            check_shape_contract(),
            check_stacked_attention(),
            check_featuremap_partition(),
            check_embedding_linearity(),
        ] {
            assert!(check.passed, "{}: {}", check.name, check.details);
        }
    }

    #[test]
    fn gradient_integrity_on_tiny_model() {
        let err = tiny_model_gradient_error().unwrap();
        assert!(err < 1e-3, "max relative error {err}");
    }
}
