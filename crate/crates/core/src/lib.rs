//! Simulation and verification engine for a two-type logistic branching
//! process with selection and mutation.
//!
//! The crate covers the forward population dynamics, the tuple-labelled
//! genealogy of the growth phase, the diffusion limit of the type frequency
//! together with its moment dual, and the ancestral selection graph at
//! carrying capacity. Every stochastic routine is a pure function of a
//! 64-bit seed.

pub mod asg;
pub mod diffusion;
pub mod error;
pub mod forward;
pub mod genealogy;
pub mod harness;
pub mod measures;
pub mod parallel;
pub mod rng;
pub mod stats;
pub mod types;
pub mod weight;

pub use error::{Error, Result};
pub use types::Type;
