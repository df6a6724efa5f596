//! Configuration, orchestration and file output for the `hmcf` runner.

pub mod config;
pub mod emit;
pub mod experiment;

pub use config::{parse_config, parse_config_with, ConfigError, Experiment, RunConfig, Violation, ViolationKind};
pub use emit::{emit_snapshot, load_height_csv, SnapshotFiles, SnapshotMeta};
pub use experiment::{run_experiment, ExitReport, Failure, MODULE_ERROR_CODE};
