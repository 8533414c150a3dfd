//! `relkit`: generate synthetic corpora, train and evaluate relational-graph
//! acoustic models, run resolution ablations, export edge vectors, extract
//! MFCC features, and run the verification suites.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};

use relkit_core::decode::LabelAlphabet;
use relkit_core::features::corpus::Corpus;
use relkit_core::features::mfcc::{compute_mfcc, MfccConfig};
use relkit_core::features::synth::{generate_corpus, synthetic_alphabet};
use relkit_core::features::{featfile, wav};
use relkit_core::harness::ablate::format_table;
use relkit_core::harness::{
    ablate, evaluate, export_edges, train, Checkpoint, DataSpec, ModelConfig, TrainOutcome,
};

#[derive(Parser)]
#[command(
    name = "relkit",
    about = "Relational-graph acoustic modeling toolkit",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus (train/dev/test splits plus alphabet).
    GenData {
        /// Data spec file (key = value lines); omit for built-in defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a generated corpus.
    Train {
        /// Model/training configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Corpus directory (as produced by gen-data).
        #[arg(long)]
        data: PathBuf,
        /// Output directory for the checkpoint and report.
        #[arg(long)]
        out: PathBuf,
        /// Resume from an existing checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a corpus split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Split to evaluate (train, dev or test).
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Train and evaluate every resolution setting plus the r = 0 baseline.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Optional CSV output path for the table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export per-frame edge vectors and per-group means to CSV.
    ExportEdges {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Compute MFCC features for a PCM-16 mono WAV file.
    Mfcc {
        /// Input WAV file.
        #[arg(long)]
        wav: PathBuf,
        /// Output feature file.
        #[arg(long)]
        out: PathBuf,
        /// Number of cepstral coefficients.
        #[arg(long, default_value_t = 13)]
        coefficients: usize,
        /// Append delta and delta-delta features.
        #[arg(long)]
        deltas: bool,
        /// Resample inputs whose rate differs from 16 kHz.
        #[arg(long)]
        resample: bool,
    },
    /// Run every verification suite and print one pass/fail line each.
    Check,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::GenData { spec, out } => cmd_gen_data(spec.as_deref(), &out),
        Command::Train {
            config,
            data,
            out,
            resume,
        } => cmd_train(&config, &data, &out, resume.as_deref()),
        Command::Eval {
            checkpoint,
            data,
            split,
        } => cmd_eval(&checkpoint, &data, &split),
        Command::Ablate { config, data, out } => cmd_ablate(&config, &data, out.as_deref()),
        Command::ExportEdges {
            checkpoint,
            data,
            out,
            split,
        } => cmd_export(&checkpoint, &data, &out, &split),
        Command::Mfcc {
            wav,
            out,
            coefficients,
            deltas,
            resample,
        } => cmd_mfcc(&wav, &out, coefficients, deltas, resample),
        Command::Check => cmd_check(),
    }
}

fn load_alphabet(config: &ModelConfig, data_dir: &Path) -> Result<LabelAlphabet> {
    let path = if config.alphabet_path.is_empty() {
        data_dir.join("alphabet.tsv")
    } else {
        PathBuf::from(&config.alphabet_path)
    };
    LabelAlphabet::load(&path).with_context(|| format!("loading alphabet {}", path.display()))
}

fn load_split(data_dir: &Path, split: &str, alphabet: &LabelAlphabet) -> Result<Corpus> {
    let dir = data_dir.join(split);
    Corpus::load(&dir, alphabet).with_context(|| format!("loading corpus split {}", dir.display()))
}

fn cmd_gen_data(spec_path: Option<&Path>, out: &Path) -> Result<()> {
    let spec = match spec_path {
        Some(p) => {
            DataSpec::load(p).with_context(|| format!("loading data spec {}", p.display()))?
        }
        None => DataSpec::default(),
    };
    let synth = spec.to_synthetic_spec()?;
    let alphabet = synthetic_alphabet(spec.classes);
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("alphabet.tsv"), alphabet.to_file_text())?;
    for (tag, split, count) in [
        (0u64, "train", spec.train_count),
        (1, "dev", spec.dev_count),
        (2, "test", spec.test_count),
    ] {
        let corpus = generate_corpus(&synth, count, (spec.len_min, spec.len_max), tag)?;
        corpus.save(&out.join(split), &alphabet)?;
        println!("{split}: {count} utterances");
    }
    println!("alphabet: {} classes + blank", alphabet.class_count());
    println!("wrote corpus to {}", out.display());
    Ok(())
}

fn print_epochs(outcome: &TrainOutcome) {
    println!("epoch    ctc        kl         beta     total");
    for e in &outcome.epochs {
        println!(
            "{:>5}  {:>9.4}  {:>9.4}  {:>6.3}  {:>9.4}",
            e.epoch, e.mean_ctc, e.mean_kl, e.beta, e.mean_total
        );
    }
}

fn cmd_train(config_path: &Path, data: &Path, out: &Path, resume: Option<&Path>) -> Result<()> {
    let config = ModelConfig::load(config_path)
        .with_context(|| format!("loading config {}", config_path.display()))?;
    let alphabet = load_alphabet(&config, data)?;
    let train_set = load_split(data, "train", &alphabet)?;
    let resume_ckpt = match resume {
        Some(p) => Some(Checkpoint::load(p).with_context(|| format!("loading {}", p.display()))?),
        None => None,
    };
    let outcome = train(
        &config,
        alphabet.class_count(),
        &train_set,
        resume_ckpt.as_ref(),
    )?;
    print_epochs(&outcome);
    std::fs::create_dir_all(out)?;
    for mid in &outcome.mid_checkpoints {
        let path = out.join(format!("checkpoint_epoch_{:04}.bin", mid.next_epoch));
        mid.save(&path)?;
        println!("periodic checkpoint: {}", path.display());
    }
    let ckpt_path = out.join("checkpoint.bin");
    outcome.checkpoint.save(&ckpt_path)?;

    let mut report = String::new();
    report.push_str("epoch,ctc,kl,beta,total\n");
    for e in &outcome.epochs {
        report.push_str(&format!(
            "{},{},{},{},{}\n",
            e.epoch, e.mean_ctc, e.mean_kl, e.beta, e.mean_total
        ));
    }
    for split in ["dev", "test"] {
        if data.join(split).is_dir() {
            let corpus = load_split(data, split, &alphabet)?;
            let summary = evaluate(&outcome.model, &corpus, &alphabet)?;
            println!(
                "{split} PER: {:.4} over {} utterances",
                summary.per, summary.utterance_count
            );
            report.push_str(&format!("# {split}_per = {}\n", summary.per));
            for g in &summary.groups {
                println!(
                    "  group {:<10} mean edit distance {:.4}",
                    g.group, g.mean_edit
                );
                report.push_str(&format!(
                    "# {split}_group_{}_mean_edit = {}\n",
                    g.group, g.mean_edit
                ));
            }
        }
    }
    report.push_str(&format!("# wall_secs = {:.3}\n", outcome.wall_secs));
    std::fs::write(out.join("report.csv"), report)?;
    println!("checkpoint: {}", ckpt_path.display());
    println!("report: {}", out.join("report.csv").display());
    Ok(())
}

fn cmd_eval(checkpoint: &Path, data: &Path, split: &str) -> Result<()> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let (model, _) = ckpt.restore()?;
    let alphabet = load_alphabet(&model.config, data)?;
    let corpus = load_split(data, split, &alphabet)?;
    let summary = evaluate(&model, &corpus, &alphabet)?;
    println!(
        "{split} PER: {:.4} over {} utterances",
        summary.per, summary.utterance_count
    );
    for g in &summary.groups {
        println!(
            "group {:<10} total edit {:>5}  mean edit {:.4}",
            g.group, g.total_edit, g.mean_edit
        );
    }
    Ok(())
}

fn cmd_ablate(config_path: &Path, data: &Path, out: Option<&Path>) -> Result<()> {
    let config = ModelConfig::load(config_path)?;
    let alphabet = load_alphabet(&config, data)?;
    let train_set = load_split(data, "train", &alphabet)?;
    let dev_set = load_split(data, "dev", &alphabet)?;
    let test_set = load_split(data, "test", &alphabet)?;
    let rows = ablate(&config, &alphabet, &train_set, &dev_set, &test_set)?;
    print!("{}", format_table(&rows));
    if let Some(out) = out {
        let mut csv = String::from("setting,dev_per,test_per,final_loss\n");
        for r in &rows {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                r.name, r.dev_per, r.test_per, r.final_train_loss
            ));
        }
        std::fs::write(out, csv)?;
        println!("table: {}", out.display());
    }
    Ok(())
}

fn cmd_export(checkpoint: &Path, data: &Path, out: &Path, split: &str) -> Result<()> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let (model, _) = ckpt.restore()?;
    let alphabet = load_alphabet(&model.config, data)?;
    let corpus = load_split(data, split, &alphabet)?;
    let summary = export_edges(&model, &corpus, &alphabet, out)?;
    println!(
        "wrote {} rows with {} edge columns to {}",
        summary.rows,
        summary.edge_columns,
        summary.out_path.display()
    );
    println!("group means: {}", summary.groups_path.display());
    Ok(())
}

fn cmd_mfcc(
    wav_path: &Path,
    out: &Path,
    coefficients: usize,
    deltas: bool,
    resample: bool,
) -> Result<()> {
    let cfg = MfccConfig {
        coefficient_count: coefficients,
        include_deltas: deltas,
        allow_resample: resample,
        ..MfccConfig::default()
    };
    let wave = wav::read_wav(wav_path)?;
    let feats = compute_mfcc(&wave, &cfg)?;
    featfile::write_features(out, &feats)?;
    println!(
        "{}: {} frames x {} coefficients -> {}",
        wav_path.display(),
        feats.len(),
        feats.dim(),
        out.display()
    );
    Ok(())
}

fn cmd_check() -> Result<()> {
    let outcomes = relkit_core::check::run_all();
    let mut failed = 0usize;
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        println!("{status}  {:<24} {}", o.name, o.details);
        if !o.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        bail!("{failed} of {} checks failed", outcomes.len());
    }
    println!("all {} checks passed", outcomes.len());
    Ok(())
}
