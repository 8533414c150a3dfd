//! Synthetic corpus generator. Classes carry planted spectro-temporal
//! structure: each pair of sibling classes shares the same set of column
//! profiles arranged in opposite temporal order, so a per-frame classifier
//! sees identical columns for both while the temporal arrangement decides
//! the label. Listed class pairs also co-occur adjacently with boosted
//! probability.

use crate::decode::LabelAlphabet;
use crate::featuremap::FeatureSequence;
use crate::numerics::tensor::Tensor;
use crate::numerics::RngStream;
use crate::{Error, Result};

use super::corpus::{Corpus, Utterance};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub class_count: usize,
    pub feature_dim: usize,
    /// Base template duration in frames.
    pub template_len: usize,
    /// One [feature_dim, template_len] template per class.
    pub templates: Vec<Tensor<f64>>,
    /// Ordered class pairs whose adjacent co-occurrence is boosted.
    pub pairs: Vec<(usize, usize)>,
    /// Multiplicative weight on listed pairs; 1.0 means no boost.
    pub boost: f64,
    /// Standard deviation of the additive Gaussian feature noise.
    pub noise_level: f64,
    /// Per-label duration range in frames (inclusive).
    pub duration_min: usize,
    pub duration_max: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Build a spec with confusable sibling templates (see module docs).
    pub fn new(
        class_count: usize,
        feature_dim: usize,
        template_len: usize,
        pairs: Vec<(usize, usize)>,
        boost: f64,
        noise_level: f64,
        seed: u64,
    ) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::Config(format!(
                "need at least 2 classes, got {class_count}"
            )));
        }
        if template_len < 2 || feature_dim == 0 {
            return Err(Error::Config(
                "template_len must be >= 2 and feature_dim >= 1".into(),
            ));
        }
        if boost <= 0.0 {
            return Err(Error::Config(format!("boost must be > 0, got {boost}")));
        }
        for &(a, b) in &pairs {
            if a >= class_count || b >= class_count {
                return Err(Error::Config(format!(
                    "pair ({a}, {b}) references a class outside 0..{class_count}"
                )));
            }
        }
        let templates = confusable_templates(class_count, feature_dim, template_len, seed);
        for i in 0..templates.len() {
            for j in (i + 1)..templates.len() {
                if templates[i] == templates[j] {
                    return Err(Error::Config(format!("templates {i} and {j} coincide")));
                }
            }
        }
        Ok(SyntheticSpec {
            class_count,
            feature_dim,
            template_len,
            templates,
            pairs,
            boost,
            noise_level,
            duration_min: template_len,
            duration_max: template_len,
            seed,
        })
    }

    pub fn with_durations(mut self, min: usize, max: usize) -> Result<Self> {
        if min < 2 || max < min {
            return Err(Error::Config(format!(
                "bad duration range [{min}, {max}] (need max >= min >= 2)"
            )));
        }
        self.duration_min = min;
        self.duration_max = max;
        Ok(self)
    }
}

/// Sibling classes 2p and 2p+1 share two column profiles in opposite order;
/// an unpaired last class gets a single uniform profile.
fn confusable_templates(
    class_count: usize,
    dim: usize,
    template_len: usize,
    seed: u64,
) -> Vec<Tensor<f64>> {
    let root = RngStream::new(seed);
    let mut templates = Vec::with_capacity(class_count);
    let half = template_len / 2;
    for p in 0..class_count.div_ceil(2) {
        let mut rng = root.substream(1000 + p as u64);
        let profile_a: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let profile_b: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let build = |first: &[f64], second: &[f64]| {
            let mut values = vec![0.0; dim * template_len];
            for row in 0..dim {
                for col in 0..template_len {
                    let src = if col < half { first } else { second };
                    values[row * template_len + col] = src[row];
                }
            }
            Tensor::new(vec![dim, template_len], values).unwrap()
        };
        templates.push(build(&profile_a, &profile_b));
        if templates.len() < class_count {
            templates.push(build(&profile_b, &profile_a));
        }
    }
    templates
}

/// Alphabet for a synthetic corpus: classes c00.., identity eval mapping,
/// even classes grouped as "vowel" and odd ones as "stop".
pub fn synthetic_alphabet(class_count: usize) -> LabelAlphabet {
    let entries = (0..class_count)
        .map(|c| {
            let name = format!("c{c:02}");
            let group = if c % 2 == 0 { "vowel" } else { "stop" };
            (name.clone(), name, group.to_string())
        })
        .collect();
    LabelAlphabet::new(entries).unwrap()
}

fn sample_next_class(spec: &SyntheticSpec, prev: Option<usize>, rng: &mut RngStream) -> usize {
    let k = spec.class_count;
    let mut weights = vec![1.0_f64; k];
    if let Some(p) = prev {
        for &(a, b) in &spec.pairs {
            if a == p {
                weights[b] = spec.boost;
            }
        }
    }
    let total: f64 = weights.iter().sum();
    let mut draw = rng.next_uniform() * total;
    for (c, &w) in weights.iter().enumerate() {
        if draw <= w {
            return c;
        }
        draw -= w;
    }
    k - 1
}

/// Stretch a template to `duration` columns by nearest-neighbor indexing.
fn stretched_column(template: &Tensor<f64>, col: usize, duration: usize) -> Vec<f64> {
    let src_col = col * template.cols() / duration;
    (0..template.rows())
        .map(|r| template.at(r, src_col))
        .collect()
}

/// Generate one utterance: a class sequence with boosted adjacent pairs and
/// its frame sequence (stretched templates plus Gaussian noise). No frame
/// alignment is exposed; targets are the class sequence only.
pub fn generate_utterance(
    spec: &SyntheticSpec,
    label_count: usize,
    rng: &mut RngStream,
) -> (FeatureSequence<f64>, Vec<usize>) {
    let mut targets = Vec::with_capacity(label_count);
    let mut frames: Vec<Vec<f64>> = Vec::new();
    let mut prev = None;
    for _ in 0..label_count {
        let class = sample_next_class(spec, prev, rng);
        targets.push(class);
        prev = Some(class);
        let duration = if spec.duration_max > spec.duration_min {
            spec.duration_min + rng.below(spec.duration_max - spec.duration_min + 1)
        } else {
            spec.duration_min
        };
        for col in 0..duration {
            let mut frame = stretched_column(&spec.templates[class], col, duration);
            if spec.noise_level > 0.0 {
                for v in frame.iter_mut() {
                    *v += spec.noise_level * rng.next_normal::<f64>();
                }
            }
            frames.push(frame);
        }
    }
    let seq = FeatureSequence::new(spec.feature_dim, frames).unwrap();
    (seq, targets)
}

/// Generate a corpus of `utterance_count` utterances with label counts drawn
/// uniformly from `length_range` (inclusive). Utterance `i` draws from the
/// sub-stream `(spec.seed, stream_tag, i)`, so corpora with different tags
/// are disjoint and regeneration is exact.
pub fn generate_corpus(
    spec: &SyntheticSpec,
    utterance_count: usize,
    length_range: (usize, usize),
    stream_tag: u64,
) -> Result<Corpus> {
    let (lo, hi) = length_range;
    if lo == 0 || hi < lo {
        return Err(Error::Config(format!(
            "bad utterance length range [{lo}, {hi}]"
        )));
    }
    let root = RngStream::new(spec.seed).substream(stream_tag);
    let mut utterances = Vec::with_capacity(utterance_count);
    for i in 0..utterance_count {
        let mut rng = root.substream(i as u64);
        let label_count = lo + rng.below(hi - lo + 1);
        let (features, targets) = generate_utterance(spec, label_count, &mut rng);
        utterances.push(Utterance {
            id: format!("utt_{i:05}"),
            features,
            targets,
        });
    }
    Ok(Corpus { utterances })
}
