//! On-disk corpus layout: one feature file per utterance plus a `targets.tsv`
//! manifest mapping utterance ids to space-separated training labels.

use super::featfile;
use crate::decode::LabelAlphabet;
use crate::featuremap::FeatureSequence;
use crate::{Error, Result};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub features: FeatureSequence<f64>,
    pub targets: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub utterances: Vec<Utterance>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Write feature files and the target manifest into `dir`.
    pub fn save(&self, dir: &Path, alphabet: &LabelAlphabet) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let mut manifest = String::new();
        for utt in &self.utterances {
            featfile::write_features(&dir.join(format!("{}.feat", utt.id)), &utt.features)?;
            let labels: Vec<&str> = utt
                .targets
                .iter()
                .map(|&c| alphabet.train_label(c))
                .collect();
            manifest.push_str(&format!("{}\t{}\n", utt.id, labels.join(" ")));
        }
        let manifest_path = dir.join("targets.tsv");
        std::fs::write(&manifest_path, manifest)
            .map_err(|e| Error::io(manifest_path.display().to_string(), e))
    }

    /// Load a corpus saved by [`Corpus::save`].
    pub fn load(dir: &Path, alphabet: &LabelAlphabet) -> Result<Self> {
        let manifest_path = dir.join("targets.tsv");
        let manifest = std::fs::read_to_string(&manifest_path)
            .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
        let mut utterances = Vec::new();
        for (n, line) in manifest.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (id, labels) = line
                .split_once('\t')
                .ok_or_else(|| Error::Format(format!("targets.tsv line {}: missing tab", n + 1)))?;
            let targets = labels
                .split_whitespace()
                .map(|l| {
                    alphabet.class_of(l).ok_or_else(|| {
                        Error::Format(format!("unknown training label '{l}' in targets.tsv"))
                    })
                })
                .collect::<Result<Vec<usize>>>()?;
            let features = featfile::read_features(&dir.join(format!("{id}.feat")))?;
            utterances.push(Utterance {
                id: id.to_string(),
                features,
                targets,
            });
        }
        if utterances.is_empty() {
            return Err(Error::Config(format!(
                "no utterances found in {}",
                dir.display()
            )));
        }
        Ok(Corpus { utterances })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::synth::{generate_corpus, synthetic_alphabet, SyntheticSpec};

    #[test]
    fn corpus_save_load_round_trip() {
        let spec = SyntheticSpec::new(3, 4, 4, vec![], 1.0, 0.05, 21).unwrap();
        let alphabet = synthetic_alphabet(3);
        let corpus = generate_corpus(&spec, 4, (2, 3), 0).unwrap();
        let dir = std::env::temp_dir().join("relkit_corpus_test");
        let _ = std::fs::remove_dir_all(&dir);
        corpus.save(&dir, &alphabet).unwrap();
        let back = Corpus::load(&dir, &alphabet).unwrap();
        assert_eq!(back, corpus);
    }
}
