//! Charts, extrinsic invariants, point classification and the structure
//! equations of codimension-two immersions.

pub mod chart;
pub mod classify;
pub mod forms;
pub mod frame;
pub mod residuals;

pub use chart::{Atlas, Chart, DeckMap, ExampleMetadata, Factor, LeafSlice, Probe, ProbeKind, Region};
pub use classify::{classify_point, PointClass, Stratum};
pub use forms::{fundamental_forms, FundamentalForms, PointGeometry};
pub use frame::{shape_operator, weinstein_frame, ShapeFrame};
pub use residuals::{codazzi_residual, gauss_residual, ricci_eq_residual};
