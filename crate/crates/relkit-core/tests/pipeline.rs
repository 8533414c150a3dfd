//! End-to-end pipeline: generate a corpus to disk, reload it, train, decode,
//! export, checkpoint and reload, including the WAV -> MFCC feature path.

use relkit_core::features::corpus::Corpus;
use relkit_core::features::featfile;
use relkit_core::features::mfcc::{compute_mfcc, MfccConfig};
use relkit_core::features::synth::{generate_corpus, synthetic_alphabet, SyntheticSpec};
use relkit_core::features::wav::{write_wav, Waveform};
use relkit_core::harness::{evaluate, export_edges, train, Checkpoint, ModelConfig};

fn temp_dir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("relkit_pipeline_{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn corpus_to_checkpoint_round_trip() {
    let dir = temp_dir("train");
    let spec = SyntheticSpec::new(4, 8, 4, vec![(0, 1)], 2.0, 0.15, 5)
        .unwrap()
        .with_durations(3, 5)
        .unwrap();
    let alphabet = synthetic_alphabet(4);
    let corpus = generate_corpus(&spec, 6, (2, 4), 0).unwrap();
    corpus.save(&dir.join("train"), &alphabet).unwrap();
    let loaded = Corpus::load(&dir.join("train"), &alphabet).unwrap();
    assert_eq!(loaded, corpus);

    let config = ModelConfig {
        feature_dim: 8,
        window: 6,
        kernel_width: 3,
        kernel_stride: 1,
        res_time: 2,
        res_freq: 2,
        embed_dim: 4,
        hidden_width: 8,
        epochs: 5,
        learning_rate: 0.02,
        beta: 0.1,
        seed: 3,
        ..ModelConfig::default()
    };
    let outcome = train(&config, alphabet.class_count(), &loaded, None).unwrap();
    let eval_before = evaluate(&outcome.model, &loaded, &alphabet).unwrap();

    let ckpt_path = dir.join("checkpoint.bin");
    outcome.checkpoint.save(&ckpt_path).unwrap();
    let restored = Checkpoint::load(&ckpt_path).unwrap();
    let (model, _) = restored.restore().unwrap();
    let eval_after = evaluate(&model, &loaded, &alphabet).unwrap();
    assert_eq!(eval_before.per, eval_after.per);
    assert_eq!(eval_before.utterances, eval_after.utterances);

    let csv = dir.join("edges.csv");
    let summary = export_edges(&model, &loaded, &alphabet, &csv).unwrap();
    assert_eq!(summary.edge_columns, 6);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.lines().count() > 1);
}

#[test]
fn wav_to_features_path() {
    let dir = temp_dir("mfcc");
    let samples: Vec<i16> = (0..8000)
        .map(|i| {
            let t = i as f64 / 16000.0;
            (0.3 * (2.0 * std::f64::consts::PI * 440.0 * t).sin() * 32767.0) as i16
        })
        .collect();
    let wave = Waveform::new(samples, 16000);
    let wav_path = dir.join("tone.wav");
    write_wav(&wav_path, &wave).unwrap();

    let reread = relkit_core::features::wav::read_wav(&wav_path).unwrap();
    let feats = compute_mfcc(&reread, &MfccConfig::default()).unwrap();
    assert_eq!(feats.dim(), 13);
    assert_eq!(feats.len(), (8000 - 400) / 320 + 1);

    let feat_path = dir.join("tone.feat");
    featfile::write_features(&feat_path, &feats).unwrap();
    let back = featfile::read_features(&feat_path).unwrap();
    assert_eq!(back.len(), feats.len());
    for t in 0..feats.len() {
        let a: Vec<u64> = feats.frame(t).iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = back.frame(t).iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }
}
