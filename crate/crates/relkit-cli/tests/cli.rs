//! Smoke tests for the `relkit` binary surface.

use std::path::PathBuf;
use std::process::Command;

fn relkit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relkit"))
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("relkit_cli_{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn gen_train_eval_export_flow() {
    let dir = temp_dir("flow");
    let spec = "\
classes = 4
feature_dim = 8
template_len = 4
noise_level = 0.15
boost = 2.0
pairs = 0-1
duration_min = 3
duration_max = 5
len_min = 2
len_max = 4
train_count = 4
dev_count = 2
test_count = 2
seed = 5
";
    std::fs::write(dir.join("data.spec"), spec).unwrap();
    let config = "\
feature_dim = 8
window = 6
kernel_width = 3
kernel_stride = 1
res_time = 2
res_freq = 2
embed_dim = 4
hidden_width = 8
beta = 0.1
learning_rate = 0.02
epochs = 3
seed = 9
";
    std::fs::write(dir.join("train.cfg"), config).unwrap();

    let out = relkit()
        .args(["gen-data", "--spec"])
        .arg(dir.join("data.spec"))
        .arg("--out")
        .arg(dir.join("data"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.join("data/alphabet.tsv").is_file());
    assert!(dir.join("data/train/targets.tsv").is_file());

    let out = relkit()
        .args(["train", "--config"])
        .arg(dir.join("train.cfg"))
        .arg("--data")
        .arg(dir.join("data"))
        .arg("--out")
        .arg(dir.join("run"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("dev PER"), "{stdout}");
    assert!(dir.join("run/checkpoint.bin").is_file());

    let out = relkit()
        .args(["eval", "--checkpoint"])
        .arg(dir.join("run/checkpoint.bin"))
        .arg("--data")
        .arg(dir.join("data"))
        .args(["--split", "test"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("test PER"));

    let out = relkit()
        .args(["export-edges", "--checkpoint"])
        .arg(dir.join("run/checkpoint.bin"))
        .arg("--data")
        .arg(dir.join("data"))
        .arg("--out")
        .arg(dir.join("edges.csv"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.join("edges.csv")).unwrap();
    assert!(csv.starts_with("utt,t,group,a0_1"));
    assert!(dir.join("edges_groups.csv").is_file());

    let out = relkit()
        .args(["ablate", "--config"])
        .arg(dir.join("train.cfg"))
        .arg("--data")
        .arg(dir.join("data"))
        .arg("--out")
        .arg(dir.join("table.csv"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = std::fs::read_to_string(dir.join("table.csv")).unwrap();
    let names: Vec<&str> = table
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(names, vec!["t4f1", "t2f2", "t1f4", "baseline"]);
}

#[test]
fn unknown_config_key_fails_loudly() {
    let dir = temp_dir("badcfg");
    std::fs::write(dir.join("bad.cfg"), "windoww = 20\n").unwrap();
    std::fs::create_dir_all(dir.join("data")).unwrap();
    let out = relkit()
        .args(["train", "--config"])
        .arg(dir.join("bad.cfg"))
        .arg("--data")
        .arg(dir.join("data"))
        .arg("--out")
        .arg(dir.join("run"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("windoww"), "{stderr}");
}

#[test]
fn mfcc_command_writes_feature_file() {
    let dir = temp_dir("mfcc");
    // 0.5 s of a 440 Hz tone at 16 kHz
    let samples: Vec<i16> = (0..8000)
        .map(|i| {
            let t = i as f64 / 16000.0;
            (0.3 * (2.0 * std::f64::consts::PI * 440.0 * t).sin() * 32767.0) as i16
        })
        .collect();
    let wave = relkit_core::features::wav::Waveform::new(samples, 16000);
    relkit_core::features::wav::write_wav(&dir.join("tone.wav"), &wave).unwrap();
    let out = relkit()
        .args(["mfcc", "--wav"])
        .arg(dir.join("tone.wav"))
        .arg("--out")
        .arg(dir.join("tone.feat"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let feats = relkit_core::features::featfile::read_features(&dir.join("tone.feat")).unwrap();
    assert_eq!(feats.dim(), 13);
    assert_eq!(feats.len(), 24);
}
