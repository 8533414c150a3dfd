//! Evaluation: mean-mode decoding, label collapsing, PER, and per-group
//! edit-distance summaries.

use super::model::{Model, NoiseSource};
use crate::decode::{
    best_path_decode, collapse, edit_distance, error_rate, extract_group_subsequence, LabelAlphabet,
};
use crate::features::corpus::Corpus;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GroupStat {
    pub group: String,
    pub utterances: usize,
    pub total_edit: usize,
    pub mean_edit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UttEval {
    pub id: String,
    pub hyp: Vec<usize>,
    pub edit: usize,
    pub ref_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub per: f64,
    pub utterance_count: usize,
    pub groups: Vec<GroupStat>,
    pub utterances: Vec<UttEval>,
}

/// Mean-mode decode of every utterance, parallel across a fixed chunking of
/// the corpus. Utterances are independent and the model is read-only, so
/// results are identical to the sequential order.
fn decode_corpus(model: &Model, corpus: &Corpus) -> Result<Vec<Vec<usize>>> {
    let blank = model.blank();
    let decode_one = |utt: &crate::features::corpus::Utterance| -> Result<Vec<usize>> {
        let (log_probs, _) = model.infer_utterance(&utt.features, &mut NoiseSource::Mean)?;
        Ok(collapse(&best_path_decode(&log_probs), blank))
    };
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(corpus.len().max(1));
    if workers <= 1 {
        return corpus.utterances.iter().map(decode_one).collect();
    }
    let chunk_len = corpus.len().div_ceil(workers);
    let chunks: Vec<Result<Vec<Vec<usize>>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = corpus
            .utterances
            .chunks(chunk_len)
            .map(|chunk| scope.spawn(move || chunk.iter().map(decode_one).collect()))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut out = Vec::with_capacity(corpus.len());
    for chunk in chunks {
        out.extend(chunk?);
    }
    Ok(out)
}

/// Decode every utterance with the graph at its posterior mean, collapse to
/// evaluation labels, and report PER plus per-group edit distances.
pub fn evaluate(model: &Model, corpus: &Corpus, alphabet: &LabelAlphabet) -> Result<EvalSummary> {
    if alphabet.class_count() != model.class_count {
        return Err(Error::Config(format!(
            "alphabet has {} classes but the model was trained with {}",
            alphabet.class_count(),
            model.class_count
        )));
    }
    let hyp_train = decode_corpus(model, corpus)?;
    let mut hyp_eval: Vec<Vec<String>> = Vec::with_capacity(corpus.len());
    let mut ref_eval: Vec<Vec<String>> = Vec::with_capacity(corpus.len());
    let mut utt_evals = Vec::with_capacity(corpus.len());
    for (hyp, utt) in hyp_train.iter().zip(&corpus.utterances) {
        let h_eval = alphabet.collapse_to_eval(hyp);
        let r_eval = alphabet.collapse_to_eval(&utt.targets);
        let edit = edit_distance(&h_eval, &r_eval);
        utt_evals.push(UttEval {
            id: utt.id.clone(),
            hyp: hyp.clone(),
            edit,
            ref_len: r_eval.len(),
        });
        hyp_eval.push(h_eval);
        ref_eval.push(r_eval);
    }
    let per = error_rate(&hyp_eval, &ref_eval)?;

    let mut groups = Vec::new();
    for group in alphabet.groups() {
        let mut total = 0usize;
        for (hyp, utt) in hyp_train.iter().zip(&corpus.utterances) {
            let h = extract_group_subsequence(hyp, &group, alphabet)?;
            let r = extract_group_subsequence(&utt.targets, &group, alphabet)?;
            total += edit_distance(&h, &r);
        }
        groups.push(GroupStat {
            group,
            utterances: corpus.len(),
            total_edit: total,
            mean_edit: total as f64 / corpus.len() as f64,
        });
    }
    Ok(EvalSummary {
        per,
        utterance_count: corpus.len(),
        groups,
        utterances: utt_evals,
    })
}
