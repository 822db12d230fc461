//! Experiment specifications, runners and statistical reports.

mod experiments;
mod report;
mod spec;

pub use experiments::{
    run_asg_rates, run_decay_probe, run_duality, run_experiment, run_frequency_convergence, run_growth,
    run_limits_probe, BAR_SUM_TOLERANCE,
};
pub use report::{Check, StatCell, StatReport, Timing, TrendCheck};
pub use spec::{log_grid, ExperimentKind, ExperimentSpec};

pub use crate::stats::{summary_stats, two_sample_z};
