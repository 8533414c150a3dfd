//! Training loop: momentum SGD with gradient clipping over per-utterance
//! losses, deterministic given the seed, resumable from checkpoints.

use super::checkpoint::Checkpoint;
use super::config::ModelConfig;
use super::model::{Model, NoiseSource};
use crate::features::corpus::Corpus;
use crate::numerics::tape::Tape;
use crate::numerics::tensor::Tensor;
use crate::numerics::RngStream;
use crate::{Error, Result};

const SHUFFLE_TAG: u64 = 0x5348_5546; // "SHUF"
const NOISE_TAG: u64 = 0x4e4f_4953; // "NOIS"

/// Momentum SGD with global-norm gradient clipping.
pub struct Optimizer {
    pub learning_rate: f64,
    pub momentum: f64,
    pub grad_clip: f64,
    pub velocities: Vec<Tensor<f64>>,
}

impl Optimizer {
    pub fn new(config: &ModelConfig, model: &Model) -> Self {
        Optimizer {
            learning_rate: config.learning_rate,
            momentum: config.momentum,
            grad_clip: config.grad_clip,
            velocities: model
                .params()
                .iter()
                .map(|p| Tensor::zeros(p.shape().to_vec()))
                .collect(),
        }
    }

    pub fn with_velocities(config: &ModelConfig, velocities: Vec<Tensor<f64>>) -> Self {
        Optimizer {
            learning_rate: config.learning_rate,
            momentum: config.momentum,
            grad_clip: config.grad_clip,
            velocities,
        }
    }

    pub fn step(&mut self, params: &mut [&mut Tensor<f64>], grads: &[Tensor<f64>]) {
        debug_assert_eq!(params.len(), grads.len());
        let mut scale = 1.0;
        if self.grad_clip > 0.0 {
            let norm_sq: f64 = grads
                .iter()
                .flat_map(|g| g.values().iter())
                .map(|v| v * v)
                .sum();
            let norm = norm_sq.sqrt();
            if norm > self.grad_clip {
                scale = self.grad_clip / norm;
            }
        }
        for ((param, grad), vel) in params.iter_mut().zip(grads).zip(&mut self.velocities) {
            for ((p, &g), v) in param
                .values_mut()
                .iter_mut()
                .zip(grad.values())
                .zip(vel.values_mut())
            {
                *v = self.momentum * *v - self.learning_rate * scale * g;
                *p += *v;
            }
        }
    }
}

/// Per-epoch loss decomposition. `total` always equals
/// `ctc + beta * kl` (same summation order as the training step).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_ctc: f64,
    pub mean_kl: f64,
    pub beta: f64,
    pub mean_total: f64,
}

impl EpochStats {
    /// The KL contribution to the reported total (zero when beta is zero).
    pub fn weighted_kl(&self) -> f64 {
        self.beta * self.mean_kl
    }
}

/// Outcome of a training run.
pub struct TrainOutcome {
    pub model: Model,
    pub checkpoint: Checkpoint,
    pub epochs: Vec<EpochStats>,
    /// Per-utterance total losses in processing order, across all epochs
    /// run in this call (the deterministic loss trace).
    pub trace: Vec<f64>,
    /// Mid-run checkpoints captured every `checkpoint_every` epochs.
    pub mid_checkpoints: Vec<Checkpoint>,
    pub wall_secs: f64,
}

/// Train from scratch or resume. The per-epoch ordering and sampling noise
/// derive statelessly from `(seed, epoch, utterance)`, so a resumed run
/// reproduces the uninterrupted run's remaining trace exactly.
pub fn train(
    config: &ModelConfig,
    class_count: usize,
    corpus: &Corpus,
    resume: Option<&Checkpoint>,
) -> Result<TrainOutcome> {
    if corpus.is_empty() {
        return Err(Error::Config("training corpus is empty".into()));
    }
    let start = std::time::Instant::now();
    let (mut model, mut optimizer, start_epoch) = match resume {
        Some(ckpt) => {
            let (model, velocities) = ckpt.restore()?;
            if model.class_count != class_count {
                return Err(Error::Config(format!(
                    "checkpoint has {} classes, corpus needs {class_count}",
                    model.class_count
                )));
            }
            let optimizer = Optimizer::with_velocities(&model.config.clone(), velocities);
            (model, optimizer, ckpt.next_epoch)
        }
        None => {
            let model = Model::new(config.clone(), class_count)?;
            let optimizer = Optimizer::new(config, &model);
            (model, optimizer, 0)
        }
    };
    let config = model.config.clone();
    let root = RngStream::new(config.seed);

    let mut epochs = Vec::new();
    let mut trace = Vec::new();
    let mut mid_checkpoints = Vec::new();
    for epoch in start_epoch..config.epochs {
        let beta_eff = config.beta_at_epoch(epoch);
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        root.substream(SHUFFLE_TAG)
            .substream(epoch as u64)
            .shuffle(&mut order);

        let mut ctc_sum = 0.0;
        let mut kl_sum = 0.0;
        let mut total_sum = 0.0;
        let mut batch_grads: Option<Vec<Tensor<f64>>> = None;
        let mut batch_fill = 0usize;
        for (pos, &utt_idx) in order.iter().enumerate() {
            let utt = &corpus.utterances[utt_idx];
            let mut tape = Tape::new();
            let vars = model.register(&mut tape);
            let mut noise_rng = root
                .substream(NOISE_TAG)
                .substream(epoch as u64)
                .substream(utt_idx as u64);
            let mut noise = NoiseSource::Rng(&mut noise_rng);
            let (loss, breakdown, _) = model.utterance_loss(
                &mut tape,
                &vars,
                &utt.features,
                &utt.targets,
                beta_eff,
                &mut noise,
            )?;
            if !breakdown.total.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    utterance: utt_idx,
                    ctc: breakdown.ctc,
                    kl: breakdown.kl,
                });
            }
            let grads = tape.backward(loss);
            let step_grads = model.collect_grads(&grads, &vars);
            match &mut batch_grads {
                None => batch_grads = Some(step_grads),
                Some(acc) => {
                    for (a, g) in acc.iter_mut().zip(&step_grads) {
                        for (av, gv) in a.values_mut().iter_mut().zip(g.values()) {
                            *av += gv;
                        }
                    }
                }
            }
            batch_fill += 1;
            ctc_sum += breakdown.ctc;
            kl_sum += breakdown.kl;
            total_sum += breakdown.total;
            trace.push(breakdown.total);

            let last = pos + 1 == order.len();
            if batch_fill == config.batch_size || last {
                let grads = batch_grads.take().unwrap();
                let mut params = model.params_mut();
                optimizer.step(&mut params, &grads);
                batch_fill = 0;
            }
        }
        let n = corpus.len() as f64;
        epochs.push(EpochStats {
            epoch,
            mean_ctc: ctc_sum / n,
            mean_kl: kl_sum / n,
            beta: beta_eff,
            mean_total: total_sum / n,
        });
        let every = config.checkpoint_every;
        if every > 0 && (epoch + 1) % every == 0 && epoch + 1 < config.epochs {
            mid_checkpoints.push(Checkpoint::capture(
                &model,
                &optimizer.velocities,
                epoch + 1,
                config.seed,
                0,
            ));
        }
    }

    let checkpoint =
        Checkpoint::capture(&model, &optimizer.velocities, config.epochs, config.seed, 0);
    Ok(TrainOutcome {
        model,
        checkpoint,
        epochs,
        trace,
        mid_checkpoints,
        wall_secs: start.elapsed().as_secs_f64(),
    })
}

/// Train for a limited number of epochs and capture a mid-run checkpoint
/// (used by resume tests and periodic checkpointing).
pub fn train_until(
    config: &ModelConfig,
    class_count: usize,
    corpus: &Corpus,
    stop_epoch: usize,
) -> Result<TrainOutcome> {
    let mut truncated = config.clone();
    truncated.epochs = stop_epoch.min(config.epochs);
    let out = train(&truncated, class_count, corpus, None)?;
    // the checkpoint's config must carry the full horizon for resuming
    let mut checkpoint = out.checkpoint.clone();
    checkpoint.config.epochs = config.epochs;
    Ok(TrainOutcome { checkpoint, ..out })
}
