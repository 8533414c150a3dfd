//! Resolution ablation: train and evaluate every valid tiling of the node
//! count plus the no-graph baseline.

use super::config::ModelConfig;
use super::evalrun::evaluate;
use super::train::train;
use crate::decode::LabelAlphabet;
use crate::features::corpus::Corpus;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    /// "t<D_t>f<D_f>" for graph settings, "baseline" for the r = 0 null.
    pub name: String,
    pub resolution: Option<(usize, usize)>,
    pub final_train_loss: f64,
    pub dev_per: f64,
    pub test_per: f64,
}

/// All factorizations u = time * freq compatible with the filter geometry,
/// highest time resolution first.
pub fn resolution_settings(
    feature_dim: usize,
    filtered_width: usize,
    node_count: usize,
) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for time in (1..=node_count).rev() {
        if !node_count.is_multiple_of(time) {
            continue;
        }
        let freq = node_count / time;
        if filtered_width.is_multiple_of(time) && feature_dim.is_multiple_of(freq) {
            out.push((time, freq));
        }
    }
    out
}

/// Train/evaluate one row per resolution setting plus the baseline row.
pub fn ablate(
    config: &ModelConfig,
    alphabet: &LabelAlphabet,
    train_set: &Corpus,
    dev_set: &Corpus,
    test_set: &Corpus,
) -> Result<Vec<AblationRow>> {
    let settings = resolution_settings(
        config.feature_dim,
        config.filtered_width()?,
        config.node_count(),
    );
    let mut rows = Vec::new();
    for (time, freq) in settings {
        let mut cfg = config.clone();
        cfg.res_time = time;
        cfg.res_freq = freq;
        cfg.use_graph = true;
        rows.push(run_row(
            format!("t{time}f{freq}"),
            Some((time, freq)),
            &cfg,
            alphabet,
            train_set,
            dev_set,
            test_set,
        )?);
    }
    let mut base = config.clone();
    base.use_graph = false;
    rows.push(run_row(
        "baseline".to_string(),
        None,
        &base,
        alphabet,
        train_set,
        dev_set,
        test_set,
    )?);
    Ok(rows)
}

fn run_row(
    name: String,
    resolution: Option<(usize, usize)>,
    cfg: &ModelConfig,
    alphabet: &LabelAlphabet,
    train_set: &Corpus,
    dev_set: &Corpus,
    test_set: &Corpus,
) -> Result<AblationRow> {
    let outcome = train(cfg, alphabet.class_count(), train_set, None)?;
    let dev = evaluate(&outcome.model, dev_set, alphabet)?;
    let test = evaluate(&outcome.model, test_set, alphabet)?;
    Ok(AblationRow {
        name,
        resolution,
        final_train_loss: outcome
            .epochs
            .last()
            .map(|e| e.mean_total)
            .unwrap_or(f64::NAN),
        dev_per: dev.per,
        test_per: test.per,
    })
}

/// Render rows as an aligned text table.
pub fn format_table(rows: &[AblationRow]) -> String {
    let mut out = String::from("setting      dev_per   test_per  final_loss\n");
    for r in rows {
        out.push_str(&format!(
            "{:<12} {:>8.4}  {:>8.4}  {:>10.4}\n",
            r.name, r.dev_per, r.test_per, r.final_train_loss
        ));
    }
    out
}
