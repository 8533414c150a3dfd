//! Model assembly, training, evaluation, ablations, analysis exports.

pub mod ablate;
pub mod checkpoint;
pub mod config;
pub mod evalrun;
pub mod export;
pub mod model;
pub mod train;

pub use ablate::{ablate, resolution_settings, AblationRow};
pub use checkpoint::Checkpoint;
pub use config::{DataSpec, ModelConfig};
pub use evalrun::{evaluate, EvalSummary};
pub use export::export_edges;
pub use model::{Model, NoiseSource};
pub use train::{train, EpochStats, TrainOutcome};
