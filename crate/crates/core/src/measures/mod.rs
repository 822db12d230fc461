//! Offspring laws, law families, model parameters and the coupled event
//! measure used by the genealogy construction.

mod coupling;
mod family;
mod law;
mod params;

pub use coupling::{build_coupling, coupling_for_laws, coupling_selective_mass, quantile_coupling, CouplingMeasure};
pub use family::{perturb, FamilyKind, FamilySpec, LawBuilder, LawFamily, LimitConstants, MassValue};
pub use law::{check_orderings, equalize_mass, OrderingReport, ReproductionLaw};
pub use params::ModelParams;

/// `Σ (i − 1) μ(i)`.
pub fn mean_rate(law: &ReproductionLaw) -> crate::weight::Rational {
    law.mean_rate()
}

/// `Σ (i − 1)^ℓ μ(i)`.
pub fn central_moment(law: &ReproductionLaw, order: u32) -> crate::weight::Rational {
    law.central_moment(order)
}
