//! Configuration-driven experiment runner for the aggregation-diffusion
//! solvers: single runs, parameter sweeps and built-in presets.

pub mod config;
pub mod presets;
pub mod runner;
pub mod sweep;

pub use config::{load_config, validate_config, ExperimentConfig, Violation};
pub use runner::{run_experiment, RunOutcome, SolverSummary};
pub use sweep::{sweep, Classification, SweepParam, SweepRow};
