//! The tuple-labelled population of the growth phase, descendant
//! fractions, and the coupling with the limiting branching process.

mod arena;
mod coupled;
mod growth;
mod label;
mod labeled;

pub use coupled::{
    coupled_rates, project_k_rates, simulate_coupled, CoupledLaws, CoupledMove, CoupledPair, CoupledPath,
    CoupledSnapshot,
};
pub use growth::{
    asymptotic_fraction_estimate, growth_experiment, FractionEstimate, GrowthOptions, GrowthSample, DEFAULT_STOP_SIZE,
};
pub use label::{descendant_fraction, IndividualLabel, LabeledPopulation};
pub use labeled::{simulate_labeled, LabelRecord, LabeledPath, LabeledSnapshot};
