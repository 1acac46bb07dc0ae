use thiserror::Error;

/// Crate-wide error type. Variant names are part of the CLI contract: the
/// binary prints them verbatim and exits 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix asymmetry {max_asym:e} exceeds the relative tolerance {tol:e}")]
    NotSymmetric { max_asym: f64, tol: f64 },

    #[error("pivot {pivot:e} at column {index} is below the SPD floor")]
    NotSpd { index: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("model kind `{0}` carries no dataset")]
    ModelHasNoData(&'static str),

    #[error("the random-walk example target is two-dimensional, got {0}")]
    RwmDimension(usize),

    #[error("objective is non-finite at the initial point")]
    NonFiniteObjective,

    #[error("proposal mean does not equal the optimized mode")]
    MeanMismatch,

    #[error("mode search did not converge (gradient norm {0:e})")]
    ModeNotConverged(f64),

    #[error("dominance check failed (max violation {0:e}); refusing to certify a rate")]
    DominanceNotVerified(f64),

    #[error("quadrature supports dimension <= 2, got {0}")]
    DimensionTooLarge(usize),

    #[error("grid too coarse: doubling the point count moved the result by {rel:e} relative")]
    GridTooCoarse { rel: f64 },

    #[error("power iteration stalled after {0} iterations")]
    PowerIterationStalled(usize),

    #[error("density bound must be positive, got {0}")]
    InvalidBound(f64),

    #[error("operation requires an independence-proposal kernel")]
    NotIndependenceKernel,

    #[error("cannot generate responses for model kind `{0}`")]
    UnknownKind(&'static str),

    #[error("response {value} at row {row} is invalid for model kind `{kind}`")]
    InvalidResponse {
        row: usize,
        value: f64,
        kind: &'static str,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable name, used by the CLI's error reporting.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NotSymmetric { .. } => "NotSymmetric",
            Error::NotSpd { .. } => "NotSpd",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::ModelHasNoData(_) => "ModelHasNoData",
            Error::RwmDimension(_) => "RwmDimension",
            Error::NonFiniteObjective => "NonFiniteObjective",
            Error::MeanMismatch => "MeanMismatch",
            Error::ModeNotConverged(_) => "ModeNotConverged",
            Error::DominanceNotVerified(_) => "DominanceNotVerified",
            Error::DimensionTooLarge(_) => "DimensionTooLarge",
            Error::GridTooCoarse { .. } => "GridTooCoarse",
            Error::PowerIterationStalled(_) => "PowerIterationStalled",
            Error::InvalidBound(_) => "InvalidBound",
            Error::NotIndependenceKernel => "NotIndependenceKernel",
            Error::UnknownKind(_) => "UnknownKind",
            Error::InvalidResponse { .. } => "InvalidResponse",
            Error::Parse { .. } => "Parse",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
