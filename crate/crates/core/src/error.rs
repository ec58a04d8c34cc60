use thiserror::Error;

use crate::C64;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the numerical pipeline.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("connection shape error: {0}")]
    Shape(String),

    #[error("poles {i} and {j} are {dist:.3e} apart, below the separation tolerance {tol:.3e}")]
    PoleCollision { i: usize, j: usize, dist: f64, tol: f64 },

    #[error("evaluation point {z} is within {dist:.3e} of pole {pole} (guard {guard:.3e})")]
    EvaluationNearPole { z: C64, pole: usize, dist: f64, guard: f64 },

    #[error("path segment {segment} passes within {dist:.3e} of pole {pole} (guard {guard:.3e})")]
    PathNearPole { segment: usize, pole: usize, dist: f64, guard: f64 },

    #[error("path waypoints {0} and {1} coincide")]
    DegeneratePathSegment(usize, usize),

    #[error("step size underflow at t = {t:.6e} (h = {h:.3e}): {context}")]
    StepSizeUnderflow { t: f64, h: f64, context: String },

    #[error("integration exceeded {0} steps")]
    MaxStepsExceeded(usize),

    #[error("cannot isolate pole {pole}: nearest other pole is {dist:.3e} away")]
    LoopConstruction { pole: usize, dist: f64 },

    #[error("matrix is not invertible (|det| = {0:.3e})")]
    NonInvertible(f64),

    #[error("operation requires {expected} normalization, connection is {found}")]
    NormalizationMismatch { expected: &'static str, found: &'static str },

    #[error("connection failed validation: {0}")]
    InvalidConnection(String),

    #[error("leading eigenvalue gap {gap:.3e} at pole {pole} fell below the resonance tolerance {tol:.3e}")]
    ResonanceOnset { pole: usize, gap: f64, tol: f64 },

    #[error("the infinity expansion of the trivial system has |R21| = {0:.3e}; no auxiliary chart of this form")]
    DegenerateGaugeSource(f64),

    #[error("u1 = 0: the gauge map is undefined on the theta divisor")]
    TauVanishes,

    #[error("Newton refinement did not converge after {iterations} iterations (|u1| = {residual:.3e})")]
    NewtonNonConvergence { iterations: usize, residual: f64 },

    #[error("scan inconclusive: {0}")]
    ScanInconclusive(String),

    #[error("pole-order sampling failed: {0}")]
    SamplingFailure(String),

    #[error("fixture generation exhausted {0} resampling attempts")]
    ResamplingExhausted(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
