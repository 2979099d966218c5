//! Experiment orchestration: scenario files, seeded Monte Carlo runs,
//! metric aggregation and result files.

pub mod config;
pub mod emit;
pub mod reproduce;
pub mod run;

pub use config::{fs_to_rho, ScenarioConfig, SweepParam};
pub use emit::{emit, emit_all, write_csv, Format, CSV_HEADER};
pub use run::{run_scenario, run_with_workers, ResultRow, ScenarioResult, TrialDumpRow};
