//! Experiment driver: configuration, output layout, manifests and the
//! `gen-data` / `train` / `embed` / `eval` pipeline.

pub mod config;
pub mod manifest;
pub mod pipeline;

pub use config::ExperimentConfig;
pub use manifest::Manifest;
pub use pipeline::{run, Command, Layout, RunOptions, Status};
