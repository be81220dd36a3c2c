//! Error types shared across the crate.

use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("evaluation failed at {point:?}: {source}")]
    Evaluation {
        point: Vec<f64>,
        #[source]
        source: EvalError,
    },

    #[error("metric is singular (det = {det:e}) at {point:?}")]
    SingularMetric { point: Vec<f64>, det: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unsupported dimension {n}: {reason}")]
    UnsupportedDimension { n: usize, reason: &'static str },

    #[error("discriminant p^2 + 4q = {0} is negative; the metallic number is not real")]
    ComplexDiscriminant(f64),

    #[error("discriminant p^2 + 4q vanishes; 2*sigma - p = 0")]
    DegenerateDiscriminant,

    #[error("q = 0: the structure is not invertible")]
    ZeroQ,

    #[error("not a projection: residual {residual:e} at {point:?}")]
    NotAProjection { residual: f64, point: Vec<f64> },

    #[error("not an almost product structure: |F^2 - I| = {residual:e} at {point:?}")]
    NotAProductStructure { residual: f64, point: Vec<f64> },

    #[error("J is not g-symmetric: |gJ - (gJ)^T| = {residual:e}")]
    IncompatiblePair { residual: f64 },

    #[error("bilinear form is degenerate: smallest |eigenvalue| = {min_abs:e}")]
    DegenerateForm { min_abs: f64 },

    #[error("jacobian is singular")]
    SingularJacobian,

    #[error("operation needs symbolic connection coefficients")]
    SymbolicConnectionRequired,

    #[error("scenario schema error: {0}")]
    Schema(String),

    #[error("scenario validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn eval(point: &[f64], source: EvalError) -> Self {
        Error::Evaluation {
            point: point.to_vec(),
            source,
        }
    }

    /// Sample point attached to the error, if any.
    pub fn witness(&self) -> Option<&[f64]> {
        match self {
            Error::Evaluation { point, .. }
            | Error::SingularMetric { point, .. }
            | Error::NotAProjection { point, .. }
            | Error::NotAProductStructure { point, .. } => Some(point),
            _ => None,
        }
    }
}
