use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An index or quantum number outside the truncated basis.
    #[error("{what} = {value} out of range (must be < {limit})")]
    OutOfRange { what: &'static str, value: usize, limit: usize },

    /// A parameter outside the domain of the model.
    #[error("domain error: {0}")]
    Domain(String),

    /// The tomography design matrix cannot determine the requested block.
    #[error("rank-deficient reconstruction: {0}")]
    RankDeficient(String),

    /// A trace too short or too coarse to separate the model frequencies.
    #[error("ill-conditioned extraction: {0}")]
    Conditioning(String),

    /// Integrator lost unitarity beyond tolerance.
    #[error("step size too large: {0}")]
    StepSize(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Self::Domain(msg.into())
    }

    /// True for errors that come from the numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Self::StepSize(_))
    }
}
