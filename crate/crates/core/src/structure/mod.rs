//! Nullity, relative nullity, the splitting tensor, the normal connection
//! form and closed-leaf curvature.

pub mod connection;
pub mod leaf;
pub mod nullity;
pub mod report;
pub mod splitting;

pub use connection::{composition_criterion, connection_form, connection_form_coords, CompositionReport};
pub use leaf::{leaf_total_curvature, LeafCurvature};
pub use nullity::{nullity, nullity_data, nullity_direction, nullity_direction_at, NullityData};
pub use report::{structure_report, StructureReport};
pub use splitting::{riccati_residual, splitting_data, splitting_tensor, RiccatiReport, SplittingData};
