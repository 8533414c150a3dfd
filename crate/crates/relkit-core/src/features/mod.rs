//! Acoustic front-end and corpus plumbing: WAV input, the MFCC pipeline,
//! the binary feature-file container, and the synthetic corpus generator.

pub mod corpus;
pub mod featfile;
pub mod mfcc;
pub mod synth;
pub mod wav;

pub use corpus::{Corpus, Utterance};
pub use mfcc::{compute_mfcc, MfccConfig};
pub use synth::{generate_corpus, SyntheticSpec};
pub use wav::Waveform;
