//! Pipeline orchestration for the `rulemap` binary: configuration merging,
//! the five file-to-file stages, and the run manifest.

pub mod config;
pub mod error;
pub mod pipeline;

pub use config::{resolve, CliOverrides, FileConfig, PipelineConfig, PipelineMode, SeedSource};
pub use error::StageError;
pub use pipeline::{run_pipeline, Manifest};
