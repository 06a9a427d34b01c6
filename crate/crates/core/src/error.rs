use thiserror::Error;

pub type Result<T> = std::result::Result<T, OscError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OscError {
    #[error("unsupported dimension {dim}: {context}")]
    UnsupportedDimension { dim: usize, context: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("measure has nonzero total mass {mass}")]
    NonzeroMass { mass: f64 },

    #[error("moment condition violated: moment {multiindex:?} = {value} (required vanishing up to degree {order})")]
    MomentCondition {
        order: u32,
        multiindex: Vec<u32>,
        value: f64,
    },

    #[error("derivative of order {order} not available for {kind}")]
    DerivativeOrder { order: u32, kind: &'static str },

    #[error("point {x} lies outside the sampled grid [{lo}, {hi}]")]
    OutsideGrid { x: f64, lo: f64, hi: f64 },

    #[error("empty sample plan")]
    EmptyPlan,

    #[error("evaluation budget of {budget} exhausted ({context}); error estimate {error:e}")]
    BudgetExhausted {
        budget: usize,
        error: f64,
        context: String,
    },
}

impl OscError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        OscError::InvalidParameter(msg.into())
    }
}
