//! File formats, experiment orchestration and the `gpsnap` command line on
//! top of [`gpsnap_core`].

pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;

pub use config::ExperimentConfig;
pub use error::AppError;
pub use pipeline::{run_pipeline, Setup};
