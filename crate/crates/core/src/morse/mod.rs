//! Type numbers τ_k from height functions: critical point counts, the
//! normal-bundle integral, and the leaf formula for wide immersions.

pub mod leaf;
pub mod profile;
pub mod quadrature;
pub mod report;

pub use leaf::{tau_by_leaf_formula, LeafEstimate, LeafOptions};
pub use profile::{morse_profile, tau_by_morse, CriticalPoint, MorseEstimate, MorseOptions, MorseProfile, SeedCache};
pub use quadrature::{pointwise_density, tau_by_quadrature, QuadratureEstimate, QuadratureOptions};
pub use report::{chen_and_wide, ChenVerdict, TypeNumberReport};
