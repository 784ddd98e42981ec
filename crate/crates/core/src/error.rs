use thiserror::Error;

/// Errors raised by the numerical pipelines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("metric is not invertible at {at:?} (|det g| = {det:e})")]
    SingularMetric { at: Vec<f64>, det: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("event {at:?} lies outside the declared domain of {metric}")]
    OutOfDomain { metric: String, at: Vec<f64> },

    #[error("integrator failed at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("vector is not null future (character: {character})")]
    NotNullFuture { character: String },

    #[error("ray does not cross the Cauchy surface within horizon {horizon}")]
    NoCauchyCrossing { horizon: f64 },

    #[error("direction outside the hemisphere chart (u2 = {u2})")]
    OutOfHemisphere { u2: f64 },

    #[error("coordinate change is numerically singular (det A = {det:e})")]
    RegularityViolation { det: f64 },

    #[error("class is not in the contact hyperplane (contact value {value:e})")]
    NotCelestial { value: f64 },

    #[error("celestial curve is not regular at s = {s} (d2h/dt2 = {curvature:e})")]
    NonRegularCurve { s: f64, curvature: f64 },

    #[error("root continuation lost at s = {s}: {reason}")]
    ContinuationLost { s: f64, reason: String },

    #[error("degenerate spacelike complement of the ray tangent")]
    DegenerateComplement,

    #[error("bump function violates f(t) = 0 for t <= 0 (f({t}) = {value})")]
    InvalidBump { t: f64, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
