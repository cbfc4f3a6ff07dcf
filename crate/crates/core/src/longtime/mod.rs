//! Long-time behaviour of the two-species diffusion with constant parameters:
//! absorption without immigration, Feller classification of the boundaries,
//! the invariant law and its Poincaré constant, and the stationary law of
//! the multispecies model.

mod absorption;
mod boundary;
mod invariant;
mod multispecies;
mod poincare;

pub use absorption::{
    absorption_prob, expected_absorption_time, random_switching_absorption_check, simulate_absorptions,
    AbsorptionSample,
};
pub use boundary::{classify_boundaries, BoundaryClass, BoundaryKind, BoundaryReport};
pub use invariant::{equilibrium_simpson, equilibrium_summary, poincare_bound, EquilibriumSummary, InvariantDensity};
pub use multispecies::{stationary_density_multispecies, MultispeciesDensity, NormalizerEstimate};
pub use poincare::{empirical_relaxation_rate, sample_invariant, RelaxationFit};
