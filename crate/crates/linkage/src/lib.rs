//! Scenario runner: loads JSON scenario files and drives solves, sweeps,
//! the verification suite and the Monte Carlo oracle.

mod error;
pub mod records;
pub mod run;
pub mod scenario_file;
pub mod verify;

pub use error::CliError;
pub use records::{Format, Record, CSV_HEADER};
pub use run::{execute, run, Command, RunOutput, RunSpec, Sweep, SweepVar};
pub use scenario_file::ScenarioFile;
