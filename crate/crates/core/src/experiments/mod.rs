//! Experiment drivers: configuration, seeded initial data, output files and
//! the `run`, `convergence`, `min-c` and `sweep` commands.

pub mod commands;
pub mod config;
pub mod initial;
pub mod output;

pub use commands::{
    cmd_convergence, cmd_min_c, cmd_run, cmd_sweep, simulate, Certificate, ConvergenceSummary, MinCSummary, RunSummary,
    SweepSummary,
};
pub use config::{Overrides, RunConfig, SweepParam};
pub use initial::{gen_initial, InitialSpec};
