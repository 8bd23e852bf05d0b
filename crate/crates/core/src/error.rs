use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("shape mismatch: expected {expected} samples, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid exponent p = {0} (need p >= 1)")]
    InvalidExponent(f64),
    #[error("invalid TT specification: {0}")]
    InvalidTT(String),
    #[error("singular operator (pivot ratio {pivot_ratio:.3e})")]
    SingularOperator { pivot_ratio: f64, kernel: Vec<f64> },
    #[error("eigen iteration failed: {0}")]
    EigenFailure(String),
    #[error("geometry is not Yamabe-positive (lambda1 = {lambda1:.3e})")]
    NotYamabePositive { lambda1: f64 },
    #[error("invalid conformal transform: {0}")]
    InvalidTransform(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("no constant bracket: {0}")]
    NoBracket(String),
    #[error("solve failed: {reason}")]
    SolveFailure { reason: String, history: Vec<f64> },
    #[error("conformal Killing kernel detected (smallest eigenvalue {sigma_min:.3e}, threshold {threshold:.3e})")]
    ConformalKillingKernel { sigma_min: f64, threshold: f64, direction: Vec<f64> },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("search exhausted: {0}")]
    NotFound(String),
    #[error("infeasible layout: {0}")]
    InvalidLayout(String),
    #[error("not a T-association: {reason}")]
    NotAssociation { reason: String, witness: Option<(f64, Vec<f64>)> },
    #[error("no half-continuity witness within budget")]
    NoWitness,
    #[error("profile input: {0}")]
    Profile(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn solve(reason: impl Into<String>, history: Vec<f64>) -> Self {
        Error::SolveFailure { reason: reason.into(), history }
    }
}
