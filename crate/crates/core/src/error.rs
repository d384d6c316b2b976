use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown model family `{0}`")]
    UnknownFamily(String),
    #[error("family `{family}` requires coefficient `{name}`")]
    MissingCoefficient { family: String, name: String },
    #[error("coefficient `{name}` must be positively bounded below (sampled minimum {min})")]
    PositivityViolation { name: String, min: f64 },
    #[error("domain error evaluating the vector field at t={t}, x={x}")]
    Domain { t: f64, x: f64 },
    #[error("second x-derivative is not provided for concave families")]
    Unavailable,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("size mechanism requires a model of the form h(t, x - γ)")]
    SizeMechanismUnsupported,

    #[error("empty time span")]
    EmptySpan,
    #[error("non-finite initial state {0}")]
    NonFiniteState(f64),
    #[error("step budget of {0} steps exhausted")]
    StepsExhausted(usize),
    #[error("right-hand side returned NaN at t={t}, x={x}")]
    NanRhs { t: f64, x: f64 },
    #[error("step size underflow at t={0}")]
    StepUnderflow(f64),
    #[error("time {t} lies outside the trajectory span [{lo}, {hi}]")]
    OutsideSpan { t: f64, lo: f64, hi: f64 },

    #[error("burn-in did not converge (gap {gap} after burn-in {burn_in})")]
    NonConvergentBurnIn { gap: f64, burn_in: f64 },
    #[error("limit equation at γ={gamma} lacks the required hyperbolic structure ({found} of {needed} solutions)")]
    MissingLimitStructure { gamma: f64, found: usize, needed: usize },
    #[error("averaging window {window} exceeds the solution span {span}")]
    WindowTooLong { window: f64, span: f64 },

    #[error("classification is indeterminate at parameter {0}")]
    Indeterminate(f64),
    #[error("bracket endpoints carry the same label `{0}`")]
    BracketNotStraddling(String),
    #[error("bracket expansion cap reached without straddling the critical level")]
    BracketExpansionCap,
    #[error("no bistable parameter found in the scanned range")]
    NoBistableParameter,
    #[error("frozen rate {0} has no repulsive solution at the requested time")]
    MissingRepeller(f64),
}
