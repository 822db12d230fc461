//! The frequency diffusion of the minus type, its moment dual, and the
//! deterministic flow onto the carrying-capacity line.

mod dual;
mod duality;
mod flow;
mod params;
mod sde;

pub use dual::{coupled_duals, dual_at_times, dual_pmf, simulate_dual, DualPath};
pub use duality::{duality_check, duality_grid, generator_duality_residual, DualityGrid, DualityReport};
pub use flow::{gamma_projection, katzenberger_flow, vector_field, PlanePoint, FLOW_TOLERANCE};
pub use params::{diffusion_coefficient, drift, DiffusionParams, VARIANCE_TOLERANCE};
pub use sde::{sde_at_times, simulate_sde, ScalarPath};
