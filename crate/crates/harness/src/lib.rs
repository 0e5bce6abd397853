//! Experiment harness: scenario generators, stabilization measurement,
//! seeded multi-trial runs with CSV output, and the invariant check suite.

pub mod calibration;
pub mod check;
pub mod config;
pub mod experiment;
pub mod measure;
pub mod scenario;

pub use config::RunSettings;
pub use experiment::{run_experiment, Experiment, ExperimentRecord, StopRule, TrialRow};
pub use measure::{default_confirm_window, measure_stabilization, scale};
pub use scenario::{build_scenario, ScenarioKind};
