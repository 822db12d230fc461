//! Ancestral selection graph at carrying capacity: the graphical
//! construction, the exact lineage-count jump law, the lineage counting
//! process and its auxiliary coupling.

mod auxiliary;
mod graphical;
mod limits;
mod lineage;
mod transition;

pub use auxiliary::{auxiliary_process, AuxiliaryRun};
pub use graphical::{
    default_epsilon, simulate_graphical, Band, CheckpointedRun, EventLog, EventRecord, EventSource, GraphicalStepper,
};
pub use limits::{
    generator_limit_probe, is_monotone_at, kappa_for, search_monotonicity_threshold, LimitRow, MonotonicityReport,
};
pub use lineage::{lineage_counting, lineage_rate_sweep, LineageCounter, LineagePath, LineagePoint, LineageStats};
pub use transition::{
    enumerate_by_subsets, p_hat_minus, p_hat_plus, p_minus, p_plus, transition_components, transition_distribution,
    untouched_probability, JumpSampler, LineageOutcome, TransitionComponents, TransitionDistribution,
};
