//! Relational-graph acoustic modeling toolkit.
//!
//! The pipeline turns a sequence of acoustic feature vectors into, per time
//! step, a local-context feature map, a probabilistic graph over
//! spectro-temporal tiles of that map, and a graph embedding that augments
//! the raw features before a linear prediction head. Training optimizes a
//! CTC objective regularized by per-step KL terms between edge posteriors
//! and priors.
//!
//! Core math is generic over the scalar type (anything implementing
//! [`numerics::Scalar`], i.e. `f32` or `f64` via `num-traits`). The training
//! harness, file formats, and the type aliases at this crate root are pinned
//! to `f64`.
//!
//! Modules:
//! - [`numerics`]: reverse-mode tape, MLPs, seeded sampling, gradient checks
//! - [`featuremap`]: context windows, temporal filtering, tile grids
//! - [`relgraph`]: edge distributions, graph sampling, graph embeddings
//! - [`attention`]: reference self-attention and the stacked-layer expansion
//! - [`varloss`]: CTC negative log-likelihood and KL closed forms
//! - [`decode`]: best-path decoding, label collapsing, edit-distance metrics
//! - [`features`]: WAV input, MFCC front-end, synthetic corpus generation
//! - [`harness`]: model assembly, training, evaluation, ablation, exports
//! - [`oracle`]: independent reference computations used by the check suites
//! - [`check`]: named verification suites exposed through the CLI

pub mod attention;
pub mod check;
pub mod decode;
pub mod error;
pub mod featuremap;
pub mod features;
pub mod harness;
pub mod numerics;
pub mod oracle;
pub mod relgraph;
pub mod varloss;

pub use error::{Error, Result};
pub use numerics::Scalar;

/// Default scalar type for the training harness and file formats.
pub type Real = f64;

/// Dense tensor over the default scalar.
pub type Tensor = numerics::tensor::Tensor<Real>;
/// Reverse-mode tape over the default scalar.
pub type Tape = numerics::tape::Tape<Real>;
/// Multi-layer perceptron over the default scalar.
pub type Mlp = numerics::mlp::Mlp<Real>;
/// Feature sequence over the default scalar.
pub type FeatureSequence = featuremap::FeatureSequence<Real>;
/// Per-time-step feature map over the default scalar.
pub type FeatureMap = featuremap::FeatureMap<Real>;
