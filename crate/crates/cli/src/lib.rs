//! Experiment harness for the drifting-oscillator digital twin: scenario
//! configs, the simulate/invert/select/predict pipeline, parameter sweeps and
//! run reports.

pub mod config;
pub mod matrix;
pub mod pipeline;
pub mod report;

pub use config::{Case, Scenario, ScenarioConfig, ValidationErrors};
pub use pipeline::{run_scenario, RunOutcome, RunSummary, Stage, StageError};

/// Exit status for a config that fails validation.
pub const EXIT_INVALID: i32 = 2;
/// Exit status for a pipeline stage failure.
pub const EXIT_FAILED: i32 = 3;
