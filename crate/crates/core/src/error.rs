use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("point {point:?} lies outside the domain of chart `{chart}`")]
    DomainViolation { chart: String, point: Vec<f64> },
    #[error("metric determinant {det:e} is below the nondegeneracy threshold")]
    DegenerateMetric { det: f64 },
    #[error("differential has rank below {n}")]
    RankDeficient { n: usize },
    #[error("normal cone width {width} exceeds a quadrant")]
    NoQuadrantFrame { width: f64 },
    #[error("a singular value {value:e} sits within a decade of the rank threshold {threshold:e}")]
    AmbiguousRank { value: f64, threshold: f64 },
    #[error("Schur block on ker B is not positive definite")]
    CNotPositive,
    #[error("frame is not unique near the probe point")]
    FrameNotSmooth,
    #[error("nullity has dimension {mu}, expected a line")]
    NullityNotLine { mu: usize },
    #[error("leaf did not close: gap {gap:e}")]
    LeafNotClosed { gap: f64 },
    #[error("critical point is degenerate (condition {condition:e})")]
    DegenerateCritical { condition: f64 },
    #[error("too many rejected directions: {rejected} of {requested}")]
    TooManyRejections { rejected: usize, requested: usize },
    #[error("band Gauss curvature {residual:e} exceeds flatness tolerance")]
    BandNotFlat { residual: f64 },
    #[error("band periodicity defect {defect:e}")]
    BandSelfCheck { defect: f64 },
    #[error("profile 2-jet mismatch {defect:e} at the seam")]
    ProfileNotC2Matched { defect: f64 },
    #[error("deck map changes the metric by {defect:e}")]
    DeckNotIsometric { defect: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("operation not applicable: {0}")]
    NotApplicable(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;
