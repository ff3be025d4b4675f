use thiserror::Error;

/// Errors shared by all analysis modules.
///
/// The split between `Precondition` and `Verification` matters for the CLI:
/// a precondition violation means the requested computation was never legal
/// (exit code 2), a verification failure means the computation ran and the
/// claimed property did not hold on the data (exit code 3).
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("input vectors are rank deficient (numerical rank < requested dimension)")]
    RankDeficient,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A ball selection contained no sample points; θ/β are undefined there.
    #[error("undefined at this scale: {0}")]
    UndefinedAtScale(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("verification failed: {0}")]
    Verification(String),

    /// Chart extraction found a point pair violating the injectivity margin.
    #[error("not a graph over the base plane at this scale: {0}")]
    NotAGraph(String),

    /// Chart extraction found disk cells with no projected sample.
    #[error("projection not surjective: {0}")]
    NotSurjective(String),

    /// No ladder depth satisfies the chart-radius threshold.
    #[error("insufficient flatness depth: {0}")]
    InsufficientDepth(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DimensionMismatch { .. }
            | Error::RankDeficient
            | Error::InvalidParameter(_)
            | Error::UndefinedAtScale(_)
            | Error::Precondition(_)
            | Error::InsufficientDepth(_) => 2,
            Error::Verification(_) | Error::NotAGraph(_) | Error::NotSurjective(_) => 3,
            Error::Io(_) | Error::Json(_) => 1,
        }
    }
}
