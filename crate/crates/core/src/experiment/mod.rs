//! Experiment orchestration behind the command-line tool: JSON run configs,
//! JSON-Lines trace export, mode comparisons, parameter sweeps and the
//! built-in invariant checks.

mod check;
mod commands;
mod config;

pub use check::{cmd_check, CheckOptions, CheckReport, SuiteResult, SUITES};
pub use commands::{
    cmd_compare, cmd_run, cmd_sweep, read_trace, CompareOutput, Latency, RunOutput, SweepRow,
};
pub use config::{parse_grid_arg, parse_mode, Overrides, RunConfig, SweepGrid, SEED_ENV};
