//! Spec-file loading and experiment commands behind the `remlab` binary.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod spec_file;

pub use commands::{cmd_compare, cmd_ldp_check, cmd_simulate, cmd_solve, cmd_sweep, CellStatus, Output, SweepReport};
pub use config::{config_hash, ExperimentConfig, NamedSpec};
pub use error::CliError;
pub use spec_file::{load_spec, parse_spec, write_spec, SpecDoc, SpecError};
