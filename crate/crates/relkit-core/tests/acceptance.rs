//! Acceptance suite. Each test prints one PASS line for its criterion; a
//! failing criterion fails its test. Run with
//! `cargo test -p relkit-core --test acceptance -- --nocapture`.

use std::time::Instant;

use relkit_core::check;
use relkit_core::features::synth::synthetic_alphabet;
use relkit_core::harness::ablate::{ablate, format_table};
use relkit_core::harness::train::train;
use relkit_core::harness::{Checkpoint, DataSpec, ModelConfig};

fn report(criterion: &str, elapsed: f64, details: &str) {
    println!("PASS  {criterion:<28} [{elapsed:.2}s]  {details}");
}

fn run_suite(criterion: &str, limit_secs: f64, f: impl FnOnce() -> check::CheckOutcome) {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed().as_secs_f64();
    assert!(outcome.passed, "{criterion}: {}", outcome.details);
    assert!(
        elapsed < limit_secs,
        "{criterion}: took {elapsed:.1}s, limit {limit_secs}s"
    );
    report(criterion, elapsed, &outcome.details);
}

/// Criterion 1: Gaussian-proxy correctness on the 50x50 grid, residual
/// below 1e-10, m in [0, 1/2), monotone in the variance, under 1 second.
#[test]
fn criterion_1_gaussian_proxy() {
    run_suite(
        "criterion-1-gaussian-proxy",
        1.0,
        check::check_gaussian_proxy_grid,
    );
}

/// Criterion 2: KL closed forms against quadrature and exact Binomial
/// summation, under 30 seconds.
#[test]
fn criterion_2_kl_closed_forms() {
    let start = Instant::now();
    let quad = check::check_kl_gaussian_quadrature();
    assert!(quad.passed, "{}", quad.details);
    let bound = check::check_kl_binomial_bound();
    assert!(bound.passed, "{}", bound.details);
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "took {elapsed:.1}s, limit 30s");
    report(
        "criterion-2-kl-closed-forms",
        elapsed,
        &format!("{}; {}", quad.details, bound.details),
    );
}

/// Criterion 3: CTC equals exhaustive path enumeration for every
/// (T <= 6, |V| <= 3, |y| <= 3) shape within 1e-9 relative, under 10 s.
#[test]
fn criterion_3_ctc_oracle() {
    run_suite("criterion-3-ctc-oracle", 10.0, check::check_ctc_enumeration);
}

/// Criterion 4: finite differences confirm the end-to-end gradient of the
/// tiny model over every trainable parameter group, under 60 seconds.
#[test]
fn criterion_4_gradient_integrity() {
    run_suite(
        "criterion-4-gradient-integrity",
        60.0,
        check::check_gradient_integrity,
    );
}

/// Criterion 5: the reference geometry yields 8 nodes, 28 edges, a
/// 32-dimensional graph embedding, and dim(c~) = 800 at D_c = 768.
#[test]
fn criterion_5_shape_contract() {
    let start = Instant::now();
    let outcome = check::check_shape_contract();
    assert!(outcome.passed, "{}", outcome.details);
    report(
        "criterion-5-shape-contract",
        start.elapsed().as_secs_f64(),
        &outcome.details,
    );
}

/// Criterion 6: 100 random two-node/two-layer instances satisfy the
/// stacked-attention expansion to 1e-12.
#[test]
fn criterion_6_stacked_attention() {
    run_suite(
        "criterion-6-stacked-attention",
        10.0,
        check::check_stacked_attention,
    );
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Criterion 7: on the synthetic co-occurrence corpus, every ablation table
/// contains the four u=8 resolution settings plus the baseline, and the
/// joint spectro-temporal settings achieve strictly lower median test PER
/// than the r = 0 baseline across 3 seeds. Under 15 minutes.
#[test]
fn criterion_7_directional_reproduction() {
    let start = Instant::now();
    let data = DataSpec::default();
    assert_eq!(data.classes, 8);
    let synth = data.to_synthetic_spec().unwrap();
    let alphabet = synthetic_alphabet(data.classes);
    let gen = |tag: u64, count: usize| {
        relkit_core::features::synth::generate_corpus(
            &synth,
            count,
            (data.len_min, data.len_max),
            tag,
        )
        .unwrap()
    };
    let train_set = gen(0, data.train_count);
    let dev_set = gen(1, data.dev_count);
    let test_set = gen(2, data.test_count);

    let base_config = ModelConfig {
        feature_dim: data.feature_dim,
        window: 20,
        kernel_width: 5,
        kernel_stride: 2,
        res_time: 2,
        res_freq: 4,
        embed_dim: 16,
        hidden_width: 32,
        beta: 0.1,
        learning_rate: 0.02,
        momentum: 0.9,
        grad_clip: 5.0,
        epochs: 30,
        batch_size: 1,
        use_graph: true,
        ..ModelConfig::default()
    };
    assert_eq!(base_config.node_count(), 8);

    let seeds = [11u64, 12, 13];
    let mut per_setting: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    for &seed in &seeds {
        let mut cfg = base_config.clone();
        cfg.seed = seed;
        let rows = ablate(&cfg, &alphabet, &train_set, &dev_set, &test_set).unwrap();
        let names: Vec<&str> = rows.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(
            names,
            vec!["t8f1", "t4f2", "t2f4", "t1f8", "baseline"],
            "ablation table must contain all four u=8 settings plus the baseline"
        );
        println!("--- seed {seed} ---");
        print!("{}", format_table(&rows));
        for r in rows {
            per_setting.entry(r.name).or_default().push(r.test_per);
        }
    }
    let median_of = |name: &str| {
        let mut v = per_setting[name].clone();
        median(&mut v)
    };
    let baseline = median_of("baseline");
    for joint in ["t4f2", "t2f4"] {
        let m = median_of(joint);
        assert!(
            m < baseline,
            "joint setting {joint} median PER {m} not strictly below baseline {baseline}"
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 900.0, "took {elapsed:.1}s, limit 900s");
    report(
        "criterion-7-directional",
        elapsed,
        &format!(
            "3 seeds: median test PER t4f2 {:.4}, t2f4 {:.4} vs baseline {:.4}",
            median_of("t4f2"),
            median_of("t2f4"),
            baseline
        ),
    );
}

/// Criterion 8: identical seeds give bitwise-identical loss traces;
/// checkpoints round-trip bitwise; resuming reproduces the uninterrupted
/// trace exactly.
#[test]
fn criterion_8_determinism_and_persistence() {
    let start = Instant::now();
    let data = DataSpec {
        classes: 4,
        feature_dim: 8,
        pairs: vec![(0, 1)],
        train_count: 4,
        dev_count: 1,
        test_count: 1,
        ..DataSpec::default()
    };
    let synth = data.to_synthetic_spec().unwrap();
    let corpus = relkit_core::features::synth::generate_corpus(&synth, 4, (2, 4), 0).unwrap();
    let config = ModelConfig {
        feature_dim: 8,
        window: 6,
        kernel_width: 3,
        kernel_stride: 1,
        res_time: 2,
        res_freq: 2,
        embed_dim: 4,
        hidden_width: 8,
        epochs: 6,
        learning_rate: 0.02,
        beta: 0.1,
        seed: 21,
        ..ModelConfig::default()
    };

    let a = train(&config, 4, &corpus, None).unwrap();
    let b = train(&config, 4, &corpus, None).unwrap();
    let bits = |t: &[f64]| t.iter().map(|v| v.to_bits()).collect::<Vec<u64>>();
    assert_eq!(bits(&a.trace), bits(&b.trace), "same-seed traces differ");

    let bytes = a.checkpoint.to_bytes();
    let reloaded = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(reloaded.to_bytes(), bytes, "checkpoint not bit-stable");

    let half = relkit_core::harness::train::train_until(&config, 4, &corpus, 3).unwrap();
    let resumed = train(&config, 4, &corpus, Some(&half.checkpoint)).unwrap();
    let mut stitched = half.trace.clone();
    stitched.extend_from_slice(&resumed.trace);
    assert_eq!(
        bits(&stitched),
        bits(&a.trace),
        "resumed trace differs from uninterrupted run"
    );
    report(
        "criterion-8-determinism",
        start.elapsed().as_secs_f64(),
        "bitwise traces, bit-stable checkpoint, exact resume",
    );
}

/// Criterion 9: edit distance is a metric on 10^4 random triples and the
/// vowel-extraction example reproduces exactly.
#[test]
fn criterion_9_metric_correctness() {
    run_suite(
        "criterion-9-metric-correctness",
        60.0,
        check::check_edit_metric,
    );
}
