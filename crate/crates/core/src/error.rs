use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid needs an even number of points >= 8, got {0}")]
    InvalidPointCount(usize),

    #[error("grid half-width must be positive and finite, got {0}")]
    InvalidHalfWidth(f64),

    #[error("field has {actual} samples but the grid has {expected}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("non-finite sample at index {0}")]
    NonFinite(usize),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state is not normalized: integral is {0}")]
    NotNormalized(f64),

    #[error("density is negative ({value:e}) at index {index}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("density is below the floor at every grid point")]
    AllMasked,

    #[error("phase unwrap failed between points {index} and {next}: jump exceeds pi (under-resolved)", next = .index + 1)]
    UnwrapFailure { index: usize },

    #[error("non-finite wavefunction after step {step}")]
    NumericAbort { step: usize },

    #[error(
        "von Neumann double integral needs {points} points but the budget is {budget}; raise vn_max_N to allow it"
    )]
    BudgetExceeded { points: usize, budget: usize },

    #[error("time {time} lies outside the trace range [{start}, {end}]")]
    OutOfRange { time: f64, start: f64, end: f64 },

    #[error("width collapsed to {sigma} at t = {time}")]
    WidthCollapse { time: f64, sigma: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
