//! Configuration, pipeline and report emission behind the `circle-renorm`
//! command.

pub mod config;
pub mod emit;
pub mod pipeline;

pub use config::{RunConfig, Stage};
pub use pipeline::{exit_code, run, RunManifest};
