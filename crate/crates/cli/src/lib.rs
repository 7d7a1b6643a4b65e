//! Reproducible survival-analysis runs: preprocessing, model fitting,
//! validation and plot emission driven by a TOML configuration.

pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod plot;
pub mod report;

pub use config::{parse_config, ConfigArgs, ModelKind, RunConfig};
pub use error::CliError;
pub use pipeline::{rerender_plots, run_pipeline, Stage};
pub use report::RunReport;
