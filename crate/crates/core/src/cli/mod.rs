//! Command-line front end: experiment configuration, sweeps and reports.

mod config;
mod report;
mod run;
mod solve;
mod validate;

pub use config::{
    parse_config, ChannelSection, ConfigError, ExperimentConfig, MethodName, MethodSection, OutputSection,
    SweepSection, TaskName, TaskSection,
};
pub use report::{sweep_report, ReportError, REPORT_COLUMNS};
pub use run::{
    apply_overrides, build_task, cells, header_hash, method_of, run, train_config, Cell, RunError, RunOptions,
    RunOutcome, ROUND_COLUMNS, ROUND_HEADER_HASH, SCHEMA_VERSION, SUMMARY_COLUMNS, SUMMARY_HEADER_HASH,
};
pub use solve::{solve_round, SolveError, SolveRequest};
pub use validate::{validate_bounds, BoundCheck, ValidateOptions};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CELLS_FAILED: i32 = 1;
    pub const INVALID: i32 = 2;
}
