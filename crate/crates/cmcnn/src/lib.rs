//! Command line, file formats and parallel evaluation for compressed
//! multi-function CNN search, on top of the `no_std` engine in `cmcnn-core`.

pub mod checkpoint;
pub mod cifar;
pub mod cli;
pub mod commands;
pub mod config;
pub mod engine;
pub mod error;
pub mod report;
pub mod results;

pub use cmcnn_core as core;
pub use error::{Error, Result};
