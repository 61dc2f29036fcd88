//! Configuration, persistence and the command entry points.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod series;

pub use checkpoint::{checkpoint_read, checkpoint_write};
pub use commands::{
    cmd_check, cmd_fit, cmd_oracle, cmd_run, config_window, initial_state, CheckReport,
    OracleReport, RunOutcome, EXIT_BLOWUP, EXIT_CHECK_FAILED,
};
pub use config::{parse_config, RunConfig, SampleSpec};
pub use series::{SeriesWriter, Table, L2_SUM};
