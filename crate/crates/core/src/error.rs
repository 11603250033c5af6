use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter {value} in axis {axis} lies outside [0,1]")]
    OutOfDomain { axis: usize, value: f64 },

    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("axis {axis}: {controls} control points require at least {controls} samples, got {samples}")]
    InsufficientSamples {
        axis: usize,
        controls: usize,
        samples: usize,
    },

    #[error("normal equations are rank-deficient in axis {axis}")]
    RankDeficient { axis: usize },

    #[error("degenerate Hessian: |det| = {det:e} is below the floor {floor:e}")]
    DegenerateHessian { det: f64, floor: f64 },

    #[error("piecewise-linear extraction supports dimensions 2 and 3, got {0}")]
    UnsupportedDimension(usize),

    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
