//! Model assembly: feature path -> relational graph module -> concatenation
//! -> linear prediction head, with a differentiable per-utterance loss.

use super::config::ModelConfig;
use crate::featuremap::{tile_dims, tile_indices, FeatureSequence};
use crate::numerics::mlp::{Activation, Mlp, MlpVars};
use crate::numerics::tape::{Gradients, Tape, Var};
use crate::numerics::tensor::Tensor;
use crate::numerics::RngStream;
use crate::relgraph::{
    edge_count, graph_embed_on, sample_summary_on, sample_transformation_on, EdgeNetVars, EdgeNets,
    GraphNoise,
};
use crate::varloss::kl_step_on;
use crate::{Error, Result};

/// The relational pathway's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphModule {
    /// Depthwise temporal filter, one kernel per feature row.
    pub conv: Tensor<f64>,
    pub edge_nets: EdgeNets<f64>,
    pub embedder: Mlp<f64>,
}

/// Full model: optional graph module plus the linear prediction head.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub class_count: usize,
    pub graph: Option<GraphModule>,
    pub head: Mlp<f64>,
}

pub struct ModelVars {
    conv: Option<Var>,
    edge: Option<EdgeNetVars>,
    embedder: Option<MlpVars>,
    head: MlpVars,
}

/// Where per-edge sampling noise comes from during a forward pass.
pub enum NoiseSource<'a> {
    /// Fresh draws from a stream (training).
    Rng(&'a mut RngStream),
    /// Pre-drawn noise, one entry per time step (gradient checking).
    Frozen(&'a [GraphNoise<f64>]),
    /// All-zero draws: deterministic mean inference (evaluation, export).
    Mean,
}

/// Per-time-step snapshot of the sampled graph.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub alpha_tilde: Vec<f64>,
    pub alpha_bar: Vec<f64>,
    pub kl_total: f64,
}

/// Scalar components of one utterance's loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub ctc: f64,
    pub kl: f64,
    pub beta: f64,
}

impl Model {
    /// Build a model with scaled-uniform initialization. Component streams
    /// are derived independently of each other, so the head initialization
    /// is identical with and without the graph module.
    pub fn new(config: ModelConfig, class_count: usize) -> Result<Self> {
        config.validate()?;
        if class_count == 0 {
            return Err(Error::Config("need at least one output class".into()));
        }
        let root = RngStream::new(config.seed);
        let u = config.node_count();
        let graph = if config.use_graph && edge_count(u) > 0 {
            let w_check = config.filtered_width()?;
            let (tile_rows, tile_cols) =
                tile_dims(config.feature_dim, w_check, config.resolution())?;
            let node_dim = tile_rows * tile_cols;
            let kernel = config.kernel_width;
            // moving-average initialization for the temporal filter
            let conv = Tensor::new(
                vec![config.feature_dim, kernel],
                vec![1.0 / kernel as f64; config.feature_dim * kernel],
            )
            .unwrap();
            let edge_nets = EdgeNets::new(
                config.feature_dim * config.window,
                config.hidden_width,
                edge_count(u),
                &mut root.substream(2),
            );
            let embedder = Mlp::new(
                &[2 * node_dim, config.hidden_width, config.embed_dim],
                Activation::Tanh,
                &mut root.substream(3),
            );
            Some(GraphModule {
                conv,
                edge_nets,
                embedder,
            })
        } else {
            None
        };
        let head = Mlp::new(
            &[config.feature_dim + config.embed_dim, class_count + 1],
            Activation::Linear,
            &mut root.substream(4),
        );
        Ok(Model {
            config,
            class_count,
            graph,
            head,
        })
    }

    /// Blank class index: the last output.
    pub fn blank(&self) -> usize {
        self.class_count
    }

    pub fn output_count(&self) -> usize {
        self.class_count + 1
    }

    pub fn edge_count(&self) -> usize {
        self.graph
            .as_ref()
            .map(|g| g.edge_nets.edge_count())
            .unwrap_or(0)
    }

    /// Named parameter tensors in a fixed order.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.graph.is_some() {
            names.push("conv".to_string());
            for net in [
                "post_mu_tilde",
                "post_sigma_tilde",
                "post_mu",
                "post_sigma",
                "prior_m0",
                "prior_mu0",
                "prior_sigma0",
            ] {
                for l in 0..2 {
                    names.push(format!("edge.{net}.w{l}"));
                    names.push(format!("edge.{net}.b{l}"));
                }
            }
            for l in 0..2 {
                names.push(format!("embedder.w{l}"));
                names.push(format!("embedder.b{l}"));
            }
        }
        names.push("head.w0".to_string());
        names.push("head.b0".to_string());
        names
    }

    pub fn params(&self) -> Vec<&Tensor<f64>> {
        let mut out = Vec::new();
        if let Some(g) = &self.graph {
            out.push(&g.conv);
            for net in g.edge_nets.nets() {
                out.extend(net.params());
            }
            out.extend(g.embedder.params());
        }
        out.extend(self.head.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<f64>> {
        let mut out: Vec<&mut Tensor<f64>> = Vec::new();
        if let Some(g) = &mut self.graph {
            out.push(&mut g.conv);
            for net in g.edge_nets.nets_mut() {
                out.extend(net.params_mut());
            }
            out.extend(g.embedder.params_mut());
        }
        out.extend(self.head.params_mut());
        out
    }

    /// Register every parameter on a fresh tape.
    pub fn register(&self, tape: &mut Tape<f64>) -> ModelVars {
        match &self.graph {
            Some(g) => ModelVars {
                conv: Some(tape.param(&g.conv)),
                edge: Some(g.edge_nets.register(tape)),
                embedder: Some(g.embedder.register(tape)),
                head: self.head.register(tape),
            },
            None => ModelVars {
                conv: None,
                edge: None,
                embedder: None,
                head: self.head.register(tape),
            },
        }
    }

    /// Gradients in the same order as [`Model::params`].
    pub fn collect_grads(&self, grads: &Gradients<f64>, vars: &ModelVars) -> Vec<Tensor<f64>> {
        let mut out = Vec::new();
        if let Some(g) = &self.graph {
            let conv_var = vars.conv.unwrap();
            out.push(Tensor::new(g.conv.shape().to_vec(), grads.wrt(conv_var).to_vec()).unwrap());
            let edge_vars = vars.edge.as_ref().unwrap();
            let nets = g.edge_nets.nets();
            let net_vars = [
                &edge_vars.post_mu_tilde,
                &edge_vars.post_sigma_tilde,
                &edge_vars.post_mu,
                &edge_vars.post_sigma,
                &edge_vars.prior_m0,
                &edge_vars.prior_mu0,
                &edge_vars.prior_sigma0,
            ];
            for (net, nv) in nets.iter().zip(net_vars) {
                for l in 0..net.layer_count() {
                    out.push(
                        Tensor::new(
                            net.weight(l).shape().to_vec(),
                            grads.wrt(nv.weights[l]).to_vec(),
                        )
                        .unwrap(),
                    );
                    out.push(
                        Tensor::new(
                            net.bias(l).shape().to_vec(),
                            grads.wrt(nv.biases[l]).to_vec(),
                        )
                        .unwrap(),
                    );
                }
            }
            let emb_vars = vars.embedder.as_ref().unwrap();
            for l in 0..g.embedder.layer_count() {
                out.push(
                    Tensor::new(
                        g.embedder.weight(l).shape().to_vec(),
                        grads.wrt(emb_vars.weights[l]).to_vec(),
                    )
                    .unwrap(),
                );
                out.push(
                    Tensor::new(
                        g.embedder.bias(l).shape().to_vec(),
                        grads.wrt(emb_vars.biases[l]).to_vec(),
                    )
                    .unwrap(),
                );
            }
        }
        for l in 0..self.head.layer_count() {
            out.push(
                Tensor::new(
                    self.head.weight(l).shape().to_vec(),
                    grads.wrt(vars.head.weights[l]).to_vec(),
                )
                .unwrap(),
            );
            out.push(
                Tensor::new(
                    self.head.bias(l).shape().to_vec(),
                    grads.wrt(vars.head.biases[l]).to_vec(),
                )
                .unwrap(),
            );
        }
        out
    }

    fn step_noise(&self, t: usize, noise: &mut NoiseSource, edges: usize) -> GraphNoise<f64> {
        match noise {
            NoiseSource::Rng(rng) => GraphNoise::sample(edges, rng),
            NoiseSource::Frozen(all) => all[t].clone(),
            NoiseSource::Mean => GraphNoise::zeros(edges),
        }
    }

    /// One time step: concatenated representation [c_t; r_t] plus the KL
    /// node and the sampled-graph trace.
    fn step_on(
        &self,
        tape: &mut Tape<f64>,
        vars: &ModelVars,
        features: &FeatureSequence<f64>,
        t: usize,
        noise: &mut NoiseSource,
    ) -> Result<(Var, Option<Var>, StepTrace)> {
        let w = self.config.window;
        let map = features.feature_map(t, w)?;
        let c_t = tape.constant(features.frame(t).to_vec());

        let (graph, conv_var, edge_vars, emb_vars) = match (&self.graph, vars) {
            (
                Some(g),
                ModelVars {
                    conv: Some(cv),
                    edge: Some(ev),
                    embedder: Some(mv),
                    ..
                },
            ) => (g, *cv, ev, mv),
            _ => {
                // ablation path: r is pinned to zero, no KL term
                let zeros = tape.constant(vec![0.0; self.config.embed_dim]);
                let ctil = tape.concat(&[c_t, zeros]);
                return Ok((
                    ctil,
                    None,
                    StepTrace {
                        alpha_tilde: Vec::new(),
                        alpha_bar: Vec::new(),
                        kl_total: 0.0,
                    },
                ));
            }
        };

        let edges = graph.edge_nets.edge_count();
        let flat = tape.leaf(map.flat().to_vec(), vec![map.flat().len()], false);
        let dist = graph.edge_nets.infer_on(tape, edge_vars, flat)?;

        let matrix = tape.leaf(map.flat().to_vec(), vec![self.config.feature_dim, w], false);
        let filtered = tape.depthwise_conv(matrix, conv_var, self.config.kernel_stride);
        let w_check = self.config.filtered_width()?;
        let tiles = tile_indices(self.config.feature_dim, w_check, self.config.resolution())?;
        let node_vars: Vec<Var> = tiles
            .into_iter()
            .map(|idx| tape.gather(filtered, idx))
            .collect();

        let step_noise = self.step_noise(t, noise, edges);
        let (_, alpha_tilde) = sample_summary_on(tape, dist.m, &step_noise.gamma);
        let s = sample_transformation_on(
            tape,
            alpha_tilde,
            dist.mu,
            dist.sigma_sq,
            &step_noise.gamma_prime,
        );
        let alpha_bar = tape.mul(s, alpha_tilde);
        let r = graph_embed_on(tape, &node_vars, alpha_bar, &graph.embedder, emb_vars)?;
        let ctil = tape.concat(&[c_t, r]);
        let kl = kl_step_on(tape, &dist);
        let trace = StepTrace {
            alpha_tilde: tape.values(alpha_tilde).to_vec(),
            alpha_bar: tape.values(alpha_bar).to_vec(),
            kl_total: tape.scalar_value(kl),
        };
        Ok((ctil, Some(kl), trace))
    }

    /// Concatenated representation for a single time step (values only).
    pub fn forward_step(
        &self,
        features: &FeatureSequence<f64>,
        t: usize,
        noise: &mut NoiseSource,
    ) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let vars = self.register(&mut tape);
        let (ctil, _, _) = self.step_on(&mut tape, &vars, features, t, noise)?;
        Ok(tape.values(ctil).to_vec())
    }

    /// Per-frame class log-probabilities for a whole utterance, stacked as
    /// a [T, classes + 1] node, plus per-step KL nodes and traces.
    pub fn forward_utterance(
        &self,
        tape: &mut Tape<f64>,
        vars: &ModelVars,
        features: &FeatureSequence<f64>,
        noise: &mut NoiseSource,
    ) -> Result<(Var, Vec<Var>, Vec<StepTrace>)> {
        if features.dim() != self.config.feature_dim {
            return Err(Error::shape(
                "utterance feature dimension",
                self.config.feature_dim,
                features.dim(),
            ));
        }
        let t_len = features.len();
        let mut lp_rows = Vec::with_capacity(t_len);
        let mut kl_terms = Vec::new();
        let mut traces = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let (ctil, kl, trace) = self.step_on(tape, vars, features, t, noise)?;
            let logits = self.head.forward_on(tape, &vars.head, ctil)?;
            lp_rows.push(tape.log_softmax(logits));
            if let Some(kl) = kl {
                kl_terms.push(kl);
            }
            traces.push(trace);
        }
        let stacked = tape.stack_rows(&lp_rows);
        Ok((stacked, kl_terms, traces))
    }

    /// Differentiable total loss for one utterance:
    /// ctc + beta_eff * sum of per-step KL totals.
    pub fn utterance_loss(
        &self,
        tape: &mut Tape<f64>,
        vars: &ModelVars,
        features: &FeatureSequence<f64>,
        targets: &[usize],
        beta_eff: f64,
        noise: &mut NoiseSource,
    ) -> Result<(Var, LossBreakdown, Vec<StepTrace>)> {
        let (log_probs, kl_terms, traces) = self.forward_utterance(tape, vars, features, noise)?;
        let ctc = tape.ctc_loss(log_probs, targets, self.blank())?;
        let ctc_value = tape.scalar_value(ctc);
        let (loss, kl_value) = if kl_terms.is_empty() || beta_eff == 0.0 {
            let kl_value = if kl_terms.is_empty() {
                0.0
            } else {
                kl_terms.iter().map(|v| tape.scalar_value(*v)).sum()
            };
            (ctc, kl_value)
        } else {
            let kl_sum = tape.add_many(&kl_terms);
            let kl_value = tape.scalar_value(kl_sum);
            let weighted = tape.mul_scalar(kl_sum, beta_eff);
            (tape.add(ctc, weighted), kl_value)
        };
        Ok((
            loss,
            LossBreakdown {
                total: tape.scalar_value(loss),
                ctc: ctc_value,
                kl: kl_value,
                beta: beta_eff,
            },
            traces,
        ))
    }

    /// Run inference (no gradients): per-frame log-probabilities and traces.
    pub fn infer_utterance(
        &self,
        features: &FeatureSequence<f64>,
        noise: &mut NoiseSource,
    ) -> Result<(Vec<Vec<f64>>, Vec<StepTrace>)> {
        let mut tape = Tape::new();
        let vars = self.register(&mut tape);
        let (stacked, _, traces) = self.forward_utterance(&mut tape, &vars, features, noise)?;
        let classes = self.output_count();
        let rows = tape
            .values(stacked)
            .chunks(classes)
            .map(|c| c.to_vec())
            .collect();
        Ok((rows, traces))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::synth::{generate_corpus, SyntheticSpec};

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            feature_dim: 8,
            window: 6,
            kernel_width: 3,
            kernel_stride: 1,
            res_time: 2,
            res_freq: 2,
            embed_dim: 4,
            hidden_width: 6,
            epochs: 2,
            ..ModelConfig::default()
        }
    }

    fn tiny_features() -> FeatureSequence<f64> {
        let mut rng = RngStream::new(5);
        let frames = (0..5)
            .map(|_| (0..8).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
            .collect();
        FeatureSequence::new(8, frames).unwrap()
    }

    #[test]
    fn concatenated_dimension_is_feature_plus_embedding() {
        let model = Model::new(tiny_config(), 3).unwrap();
        let feats = tiny_features();
        let c = model
            .forward_step(&feats, 2, &mut NoiseSource::Mean)
            .unwrap();
        assert_eq!(c.len(), 8 + 4);
    }

    #[test]
    fn ablation_switch_pins_r_to_zero() {
        let cfg = ModelConfig {
            use_graph: false,
            ..tiny_config()
        };
        let model = Model::new(cfg, 3).unwrap();
        let feats = tiny_features();
        let c = model
            .forward_step(&feats, 1, &mut NoiseSource::Mean)
            .unwrap();
        assert_eq!(&c[..8], feats.frame(1));
        assert!(c[8..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_arithmetic_at_other_widths() {
        let cfg = ModelConfig {
            feature_dim: 40,
            res_freq: 4,
            res_time: 2,
            embed_dim: 32,
            hidden_width: 8,
            ..ModelConfig::default()
        };
        let model = Model::new(cfg, 3).unwrap();
        let mut rng = RngStream::new(9);
        let frames = (0..3)
            .map(|_| (0..40).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
            .collect();
        let feats = FeatureSequence::new(40, frames).unwrap();
        let c = model
            .forward_step(&feats, 0, &mut NoiseSource::Mean)
            .unwrap();
        assert_eq!(c.len(), 72);
    }

    #[test]
    fn loss_components_sum_to_total() {
        let model = Model::new(tiny_config(), 3).unwrap();
        let feats = tiny_features();
        let mut tape = Tape::new();
        let vars = model.register(&mut tape);
        let mut rng = RngStream::new(77);
        let mut noise = NoiseSource::Rng(&mut rng);
        let (_, breakdown, traces) = model
            .utterance_loss(&mut tape, &vars, &feats, &[0, 1], 0.5, &mut noise)
            .unwrap();
        assert!(
            (breakdown.total - (breakdown.ctc + 0.5 * breakdown.kl)).abs() < 1e-12,
            "components must sum"
        );
        // traces carry per-step KL that sums to the reported KL
        let kl_from_traces: f64 = traces.iter().map(|t| t.kl_total).sum();
        assert!((kl_from_traces - breakdown.kl).abs() < 1e-9);
    }

    #[test]
    fn mean_inference_is_deterministic() {
        let model = Model::new(tiny_config(), 3).unwrap();
        let feats = tiny_features();
        let (a, _) = model
            .infer_utterance(&feats, &mut NoiseSource::Mean)
            .unwrap();
        let (b, _) = model
            .infer_utterance(&feats, &mut NoiseSource::Mean)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_single_node_grid_has_no_edges() {
        let cfg = ModelConfig {
            res_time: 1,
            res_freq: 1,
            ..tiny_config()
        };
        let model = Model::new(cfg, 3).unwrap();
        assert!(model.graph.is_none());
        assert_eq!(model.edge_count(), 0);
        let feats = tiny_features();
        let c = model
            .forward_step(&feats, 0, &mut NoiseSource::Mean)
            .unwrap();
        assert!(c[8..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn training_corpus_losses_are_finite() {
        let spec = SyntheticSpec::new(4, 8, 4, vec![], 1.0, 0.2, 3)
            .unwrap()
            .with_durations(3, 5)
            .unwrap();
        let corpus = generate_corpus(&spec, 3, (2, 3), 0).unwrap();
        let model = Model::new(tiny_config(), 4).unwrap();
        for utt in &corpus.utterances {
            let mut tape = Tape::new();
            let vars = model.register(&mut tape);
            let mut rng = RngStream::new(11);
            let mut noise = NoiseSource::Rng(&mut rng);
            let (_, breakdown, _) = model
                .utterance_loss(
                    &mut tape,
                    &vars,
                    &utt.features,
                    &utt.targets,
                    1.0,
                    &mut noise,
                )
                .unwrap();
            assert!(breakdown.total.is_finite());
        }
    }
}
