use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("geometric schedule requires strong convexity")]
    NotStronglyConvex,

    #[error("iteration {k} is beyond the schedule horizon {horizon}")]
    BeyondHorizon { k: usize, horizon: usize },

    #[error("iterates diverged at k = {k}")]
    Diverged { k: usize },

    #[error("ergodic point requested for K = {0}; need K >= 1 completed iterations")]
    EmptyErgodic(usize),

    #[error("inapplicable reference: {0}")]
    InapplicableReference(String),

    #[error("power iteration did not converge in {iterations} iterations (last estimate {estimate})")]
    PowerIteration { iterations: usize, estimate: f64 },

    #[error("no equilibrium found by support enumeration")]
    NoEquilibrium,

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
