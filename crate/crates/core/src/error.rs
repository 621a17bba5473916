use thiserror::Error;

/// Errors raised by the geometry, transport, rolling and holonomy routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid signature: {0}")]
    InvalidSignature(String),

    #[error("matrix is not in SO0({n},{nu}): {reason}")]
    NotLorentz { n: usize, nu: usize, reason: String },

    #[error("matrix is not J-skew: residual {residual:e}")]
    NotSkew { residual: f64 },

    #[error("logarithm requested outside convergence radius: |C - I| = {norm} >= {radius}")]
    OutsideLogRadius { norm: f64, radius: f64 },

    #[error("no orbit element maps u to v: {0}")]
    OrbitMismatch(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("point is not on the manifold: {0}")]
    InvalidPoint(String),

    #[error("vector is not tangent: {0}")]
    NotTangent(String),

    #[error("metric is singular or has the wrong index at {at:?}: {reason}")]
    SingularMetric { at: Vec<f64>, reason: String },

    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("invalid metric specification: {0}")]
    InvalidMetric(String),

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("invalid configuration state: {0}")]
    InvalidState(String),

    #[error("points lie in different fibers")]
    DifferentFibers,

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("frame construction failed after {attempts} attempts")]
    FrameBreakdown { attempts: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
