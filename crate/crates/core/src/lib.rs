//! Numerical laboratory for isometric immersions of nonnegatively curved
//! manifolds in codimension two.
//!
//! Geometry enters only through [`immersion::Atlas`] values built by the
//! [`gallery`] constructors. Everything downstream (curvature, Weinstein
//! frames, strata, type numbers, the splitting tensor) is computed from exact
//! third-order jets of the chart maps.

pub mod cli;
pub mod error;
pub mod gallery;
pub mod immersion;
pub mod jetcalc;
pub mod linalg;
pub mod matspec;
pub mod morse;
pub mod parallel;
pub mod sampling;
pub mod structure;
pub mod verify;

pub use error::{GeomError, Result};

/// Version string embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
