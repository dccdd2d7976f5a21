use thiserror::Error;

use crate::kernels::DiagonalConvention;

/// Errors raised by kernel construction, estimation, selection and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("need at least {required} samples, got {actual}")]
    SampleSize { required: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("kernel matrix uses {found:?}, expected {expected:?}")]
    Convention {
        expected: DiagonalConvention,
        found: DiagonalConvention,
    },

    #[error("feature {0} is not active")]
    InactiveFeature(usize),

    #[error("feature index {index} out of range for {count} features")]
    FeatureIndex { index: usize, count: usize },

    #[error("enumeration oracle refuses m = {m} (limit {limit})")]
    OracleTooLarge { m: usize, limit: usize },

    #[error("variance unavailable: {0}")]
    VarianceUnavailable(String),

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("non-numeric value `{value}` at line {line}, column `{column}`")]
    NonNumeric {
        line: usize,
        column: String,
        value: String,
    },

    #[error("input contains no data rows")]
    EmptyInput,

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors about the sample count or matrix shapes rather than
    /// about malformed input or parameters.
    pub fn is_shape_error(&self) -> bool {
        matches!(self, Error::SampleSize { .. } | Error::Shape(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
