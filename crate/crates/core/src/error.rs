use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A chain or solver parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested feedback phase cannot be realised with real bond weights
    /// on a ring of this size.
    #[error("feedback phase (-i)^{exponent} = {phase} is not real positive; choose n = 4m + 3")]
    FeedbackPhase { exponent: usize, phase: &'static str },

    /// A channel that was requested in Kraus form has a negative Choi
    /// eigenvalue.
    #[error("channel is not completely positive: Choi eigenvalue {eigenvalue:e}")]
    NotCompletelyPositive { eigenvalue: f64 },

    /// A map expected to be trace preserving is not.
    #[error("map is not trace preserving: deviation {deviation:e}")]
    NotTracePreserving { deviation: f64 },

    /// A state violates a density-matrix or covariance invariant.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// The MPDO bond dimension exceeded the configured cap.
    #[error("bond dimension {required} at bond {bond} exceeds max_bond = {max_bond}")]
    BondDimension {
        bond: usize,
        required: usize,
        max_bond: usize,
    },

    /// Integration blew up or drifted out of tolerance.
    #[error("numerical instability: {0}")]
    Unstable(String),

    #[error("linear algebra failure: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
