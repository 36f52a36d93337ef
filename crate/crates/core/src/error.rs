use thiserror::Error;

/// Errors raised by encoders, solvers and learners.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("encoder mismatch: transform built with encoder {found:016x}, expected {expected:016x}")]
    EncoderMismatch { expected: u64, found: u64 },

    #[error("normalization did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("normalization became non-positive at grid point {index} (iteration {iteration}); increase the offset epsilon")]
    Unstable { index: usize, iteration: usize },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("ill-conditioned system: condition number {condition:.3e} exceeds {cap:.1e}")]
    IllConditioned { condition: f64, cap: f64 },

    #[error("rank-deficient system: {0}")]
    RankDeficient(String),

    #[error("leverage singularity at row {index}: H_ii = {leverage}")]
    LeverageSingularity { index: usize, leverage: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("sampler initialization failed after {tries} tries")]
    Initialization { tries: usize },

    #[error("conditioning on a null event: denominator {denominator:.3e} below floor {floor:.3e}")]
    NullEvent { denominator: f64, floor: f64 },

    #[error("degenerate conditional: clipped density is zero everywhere on the grid")]
    DegenerateConditional,

    #[error("iterative training diverged at pass {pass}")]
    Divergence { pass: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::DimensionMismatch(..) => "dimension-mismatch",
            Error::EncoderMismatch { .. } => "encoder-mismatch",
            Error::NotConverged { .. } => "not-converged",
            Error::Unstable { .. } => "unstable",
            Error::Calibration(_) => "calibration",
            Error::IllConditioned { .. } => "ill-conditioned",
            Error::RankDeficient(_) => "rank-deficient",
            Error::LeverageSingularity { .. } => "leverage-singularity",
            Error::Unsupported(_) => "unsupported",
            Error::Initialization { .. } => "initialization",
            Error::NullEvent { .. } => "null-event",
            Error::DegenerateConditional => "degenerate-conditional",
            Error::Divergence { .. } => "divergence",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
