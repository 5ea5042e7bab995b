//! Experiment front-end for `gavg-core`: JSON configs and presets, validation, single
//! solves, epsilon sweeps, Feynman-Kac cross-checks and penalty sweeps, with CSV/JSON
//! reports.

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod runs;
pub mod sweep;

pub use config::ExperimentConfig;
pub use error::{LabError, LabResult};
pub use runs::{
    improves, require_valid, run_feynman_kac_check, run_penalization_sweep, run_solve, run_validation, FkReport,
    PenaltyReport, SolveTarget, ROUNDOFF_FLOOR,
};
pub use sweep::{run_epsilon_sweep, SweepReport, Verdict};
