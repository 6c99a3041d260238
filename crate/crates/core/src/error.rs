use thiserror::Error;

/// Errors raised by problem construction, integration and the condition checks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown problem `{0}` (expected ramsey, integrator or oscillator)")]
    UnknownProblem(String),

    #[error("problem `{problem}` requires parameter `{key}`")]
    MissingParameter { problem: &'static str, key: &'static str },

    #[error("parameter `{key}` = {value} is out of range: {reason}")]
    InvalidParameter { key: &'static str, value: f64, reason: &'static str },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("state {state:?} at t = {t} lies outside the state domain")]
    OutsideDomain { t: f64, state: Vec<f64> },

    #[error("non-finite value in {what} at t = {t}")]
    NonFinite { what: &'static str, t: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    /// The trajectory reached the boundary of the state domain before the
    /// requested horizon. This is a property of the control, not a numerical
    /// failure.
    #[error("trajectory is not extendible: left the state domain at t = {time} ({boundary})")]
    NonExtendible { time: f64, boundary: String },

    #[error("horizon {needed} is outside the trajectory span [{start}, {end}]")]
    TrajectoryTooShort { needed: f64, start: f64, end: f64 },

    #[error("mismatched grids: {0}")]
    GridMismatch(String),

    #[error("shooting bracket not found: {0}")]
    BracketNotFound(String),

    #[error("bisection stagnated after {iterations} iterations (width {width:e})")]
    Stagnation { iterations: usize, width: f64 },

    #[error("rule not applicable: {0}")]
    RuleInapplicable(String),
}

pub type Result<T> = std::result::Result<T, Error>;
