//! Edge-vector exports: one CSV row per (utterance, time step) with the
//! min-max-normalized edge weights, plus a per-group mean summary file.

use super::model::{Model, NoiseSource};
use crate::decode::{best_path_decode, LabelAlphabet};
use crate::features::corpus::Corpus;
use crate::relgraph::{edge_pairs, min_max_normalize};
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct ExportSummary {
    pub rows: usize,
    pub edge_columns: usize,
    pub out_path: PathBuf,
    pub groups_path: PathBuf,
}

/// Write `<out>` with one row per (utterance, t) and `<stem>_groups.csv`
/// with per-group column means. The group of a row is the group of the
/// best-path label at that frame ("blank" for blank frames).
pub fn export_edges(
    model: &Model,
    corpus: &Corpus,
    alphabet: &LabelAlphabet,
    out_path: &Path,
) -> Result<ExportSummary> {
    if alphabet.class_count() != model.class_count {
        return Err(Error::Config(format!(
            "alphabet has {} classes but the model was trained with {}",
            alphabet.class_count(),
            model.class_count
        )));
    }
    let node_count = model.config.node_count();
    let pairs = edge_pairs(node_count);
    let edge_columns = pairs.len();

    let mut csv = String::from("utt,t,group");
    for (i, j) in &pairs {
        csv.push_str(&format!(",a{i}_{j}"));
    }
    csv.push('\n');

    let mut group_sums: BTreeMap<String, (usize, Vec<f64>)> = BTreeMap::new();
    let mut rows = 0usize;
    for utt in &corpus.utterances {
        let (log_probs, traces) = model.infer_utterance(&utt.features, &mut NoiseSource::Mean)?;
        let path = best_path_decode(&log_probs);
        for (t, trace) in traces.iter().enumerate() {
            let group = if path[t] == model.blank() {
                "blank".to_string()
            } else {
                alphabet.group(path[t]).to_string()
            };
            let edges = if trace.alpha_bar.is_empty() {
                vec![0.0; edge_columns]
            } else {
                min_max_normalize(&trace.alpha_bar)
            };
            csv.push_str(&format!("{},{},{}", utt.id, t, group));
            for v in &edges {
                csv.push_str(&format!(",{v}"));
            }
            csv.push('\n');
            let entry = group_sums
                .entry(group)
                .or_insert_with(|| (0, vec![0.0; edge_columns]));
            entry.0 += 1;
            for (acc, v) in entry.1.iter_mut().zip(&edges) {
                *acc += v;
            }
            rows += 1;
        }
    }
    std::fs::write(out_path, &csv).map_err(|e| Error::io(out_path.display().to_string(), e))?;

    let groups_path = groups_path_for(out_path);
    let mut gcsv = String::from("group,rows");
    for (i, j) in &pairs {
        gcsv.push_str(&format!(",a{i}_{j}"));
    }
    gcsv.push('\n');
    for (group, (count, sums)) in &group_sums {
        gcsv.push_str(&format!("{group},{count}"));
        for s in sums {
            gcsv.push_str(&format!(",{}", s / *count as f64));
        }
        gcsv.push('\n');
    }
    std::fs::write(&groups_path, &gcsv)
        .map_err(|e| Error::io(groups_path.display().to_string(), e))?;
    Ok(ExportSummary {
        rows,
        edge_columns,
        out_path: out_path.to_path_buf(),
        groups_path,
    })
}

fn groups_path_for(out_path: &Path) -> PathBuf {
    let stem = out_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "edges".into());
    out_path.with_file_name(format!("{stem}_groups.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::synth::{generate_corpus, synthetic_alphabet, SyntheticSpec};
    use crate::harness::config::ModelConfig;
    use crate::harness::model::Model;

    fn tiny() -> (Model, Corpus, LabelAlphabet) {
        let spec = SyntheticSpec::new(4, 8, 4, vec![], 1.0, 0.1, 19)
            .unwrap()
            .with_durations(3, 3)
            .unwrap();
        let corpus = generate_corpus(&spec, 2, (2, 2), 0).unwrap();
        let cfg = ModelConfig {
            feature_dim: 8,
            window: 6,
            kernel_width: 3,
            kernel_stride: 1,
            res_time: 2,
            res_freq: 2,
            embed_dim: 4,
            hidden_width: 6,
            ..ModelConfig::default()
        };
        (Model::new(cfg, 4).unwrap(), corpus, synthetic_alphabet(4))
    }

    #[test]
    fn export_writes_normalized_rows_and_group_means() {
        let (model, corpus, alphabet) = tiny();
        let dir = std::env::temp_dir().join("relkit_export_test");
        std::fs::create_dir_all(&dir).unwrap();
        let out = dir.join("edges.csv");
        let summary = export_edges(&model, &corpus, &alphabet, &out).unwrap();
        assert_eq!(summary.edge_columns, 6);
        let text = std::fs::read_to_string(&out).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert_eq!(header.split(',').count(), 3 + 6);
        assert!(header.starts_with("utt,t,group,a0_1,"));
        let mut rows = 0;
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 9);
            for v in &fields[3..] {
                let x: f64 = v.parse().unwrap();
                assert!((0.0..=1.0).contains(&x), "normalized value {x}");
            }
            rows += 1;
        }
        assert_eq!(rows, summary.rows);

        // group means equal column means of the grouped rows
        let gtext = std::fs::read_to_string(&summary.groups_path).unwrap();
        let glines: Vec<&str> = gtext.lines().collect();
        assert!(glines.len() >= 2);
        let mut by_group: std::collections::BTreeMap<String, Vec<Vec<f64>>> = Default::default();
        for line in text.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            by_group
                .entry(fields[2].to_string())
                .or_default()
                .push(fields[3..].iter().map(|v| v.parse().unwrap()).collect());
        }
        for line in &glines[1..] {
            let fields: Vec<&str> = line.split(',').collect();
            let group = fields[0];
            let rows = &by_group[group];
            assert_eq!(rows.len(), fields[1].parse::<usize>().unwrap());
            for (col, v) in fields[2..].iter().enumerate() {
                let mean: f64 = rows.iter().map(|r| r[col]).sum::<f64>() / rows.len() as f64;
                let got: f64 = v.parse().unwrap();
                assert!((got - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_baseline_exports_zero_rows() {
        let (_, corpus, alphabet) = tiny();
        let cfg = ModelConfig {
            feature_dim: 8,
            window: 6,
            kernel_width: 3,
            kernel_stride: 1,
            res_time: 2,
            res_freq: 2,
            embed_dim: 4,
            hidden_width: 6,
            use_graph: false,
            ..ModelConfig::default()
        };
        let model = Model::new(cfg, 4).unwrap();
        let dir = std::env::temp_dir().join("relkit_export_test");
        std::fs::create_dir_all(&dir).unwrap();
        let out = dir.join("edges_baseline.csv");
        export_edges(&model, &corpus, &alphabet, &out).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        for line in text.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            for v in &fields[3..] {
                assert_eq!(v.parse::<f64>().unwrap(), 0.0);
            }
        }
    }
}
