use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    /// Raised when a constrained trading rate is requested too close to maturity.
    #[error("singular rate at t = {t} (within {guard:e} of maturity)")]
    Singularity { t: f64, guard: f64 },
    #[error("grid alignment error: {0}")]
    Alignment(String),
    #[error("quadrature did not converge on [{a}, {b}]: estimated error {error:e}")]
    Tolerance { a: f64, b: f64, error: f64 },
    #[error("misuse: {0}")]
    Misuse(String),
    #[error("state error: {0}")]
    State(String),
    #[error("missing requirement: {0}")]
    Requirement(String),
    #[error("terminal constraint unreachable: {0}")]
    Unreachable(Diagnostic),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("size limit exceeded: {0}")]
    Size(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("schema error at {field}: {message}")]
    Schema { field: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Why a terminal constraint was rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub partial_integral: f64,
    pub levels: usize,
    pub reason: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "integral of dE[Xi_t^2]/(T-t) diverges ({}; partial value {:.6e} after {} dyadic levels)",
            self.reason, self.partial_integral, self.levels
        )
    }
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
