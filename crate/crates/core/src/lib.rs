//! Compressed multi-function CNN search.
//!
//! A small CNN engine whose conv blocks each carry their own activation
//! function, a genetic search over those activation strings, and a
//! compensatory score that trades F1 against model size to pick the depth.
//!
//! The crate is `no_std` (with `alloc`). File access, timing, parallel
//! evaluation and the command line live in the `cmcnn` crate.

#![no_std]
extern crate alloc;

pub mod activation;
pub mod arch;
pub mod compensatory;
pub mod data;
pub mod error;
pub mod ga;
pub mod genome;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod surrogate;
pub mod tensor;
pub mod train;

pub use activation::Activation;
pub use arch::ArchSpec;
pub use compensatory::{alpha, select_best, size_ratio, EvalRecord};
pub use data::{LabeledImageSet, PartitionMethod, PartitionSpec};
pub use error::{Error, Result};
pub use ga::{run_ga, Candidate, Evaluation, Evaluator, GaConfig, ModelScores};
pub use genome::{FunctionSet, Genome};
pub use metrics::{f1_score, Averaging, ConfusionMatrix};
pub use model::{build_model, Model, Scalar};
pub use tensor::{Probabilities, Tensor4};
pub use train::{predict, train, TrainConfig};
