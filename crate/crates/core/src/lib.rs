//! HGTS-Former: patch tokens, rotary self-attention and two levels of
//! learnable hypergraph aggregation for multivariate time series.

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod harness;
pub mod hypergraph;
pub mod model;
pub mod nn;
pub mod plot;
pub mod verify;

pub use config::{Ablation, ModelConfig, RunConfig, Task, TopkAxis, TrainConfig};
pub use error::{HgtsError, Result};
