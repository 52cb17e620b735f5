use thiserror::Error;

/// Errors produced by the geometry engine.
#[derive(Debug, Error)]
pub enum FinslerError {
    #[error("domain violation: {0}")]
    Domain(String),

    #[error("invalid parameter `{field}`: {message}")]
    InvalidParameter { field: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("derivative budget exceeded: requested x-order {requested_x}, v-order {requested_v} (supported {max_x}, {max_v})")]
    OrderBudget {
        requested_x: usize,
        requested_v: usize,
        max_x: usize,
        max_v: usize,
    },

    #[error("unsupported dimension {0} (supported 2..=6)")]
    Dimension(usize),

    #[error("fundamental tensor is not positive definite at the given support element")]
    NotPositiveDefinite,

    #[error("singular matrix while computing {0}")]
    Singular(&'static str),

    #[error("ambiguous numerical rank: gap ratio {gap_ratio:.3e} < {required:.3e}")]
    RankAmbiguous { gap_ratio: f64, required: f64 },

    #[error("degenerate flag: the flagpole and the transverse edge are nearly parallel")]
    DegenerateFlag,

    #[error("step size underflow at t = {0}")]
    StepUnderflow(f64),

    #[error("finite-difference step underflow (step = {0:e})")]
    FdStepUnderflow(f64),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("empty sample list")]
    EmptySamples,
}

pub type Result<T> = std::result::Result<T, FinslerError>;
