//! Configuration, presets, trajectory oracle and run orchestration for the
//! `cauchy` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod error;
pub mod oracle;
pub mod presets;
pub mod run;

pub use config::{load_config, SimulationConfig};
pub use error::CliError;
