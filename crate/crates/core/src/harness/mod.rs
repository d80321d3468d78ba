//! Seeded Monte Carlo runner: experiment configuration, per-trial estimator
//! runs with permutation-matched errors, SCR and pulse-count sweeps with the
//! bound overlay, and CSV output.

mod config;
mod sweep;
mod trial;

pub use config::{
    is_iterative, ClutterConfig, EstimatorSelection, Experiment, ExperimentConfig, GeometryConfig, SweepAxis,
    SweepConfig, SweepPoint, TargetConfig,
};
pub use sweep::{
    aggregate, crb_curve, simulate, sweep, sweep_with_progress, write_crb_csv, write_sweep_csv, CellMse, CrbRow,
    EstimatorReport, SweepResult, SweepRow, TrialReport,
};
pub use trial::{match_permutation, run_estimator, trial_rng, EstimatorOutcome, EstimatorRun, IterationErrors};
