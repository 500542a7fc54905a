//! Jet arithmetic and intrinsic curvature.

pub mod curvature;
pub mod jet;

pub use curvature::{eval_jet3, intrinsic_curvature, ricci_profile, sectional_range, CurvatureData, Derivs, MetricData, RicciProfile, SectionalRange};
pub use jet::{dot, Jet};
