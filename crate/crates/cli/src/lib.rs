//! Named, reproducible experiments over the `lorenz-stab` library.

pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod plot;

pub use config::Config;
pub use error::CliError;
pub use experiments::{run_experiment, Experiment};
pub use manifest::{Check, RunManifest};
