//! Configuration-driven pipelines and the reference experiments.

pub mod config;
pub mod pipeline;
pub mod reproduce;

pub use config::{ExperimentConfig, Family, MeasureChoice, Stage, CONFIG_VERSION};
pub use pipeline::{run_pipeline, RunManifest};
pub use reproduce::{reproduce_paper, Preset, Report};
