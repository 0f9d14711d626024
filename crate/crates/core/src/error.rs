use thiserror::Error;

use crate::ecptest::TestOutcome;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone)]
pub enum Error {
    #[error("point {x} lies outside the interval [{lo}, {hi}]")]
    Domain { x: f64, lo: f64, hi: f64 },

    #[error("basis function {function} has no closed-form derivative of order {order}")]
    Capability { function: usize, order: usize },

    #[error("section {section} is not numerically an EC-space on its interval: {reason}")]
    NotECSection { section: usize, reason: String },

    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular system: zero pivot in column {column}")]
    SingularSystem { column: usize },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("space is not certified good for design (stopped at {})", .0.stage)]
    NotCertified(Box<TestOutcome>),

    #[error("no bracket: both ends classify as {0}")]
    NoBracket(String),

    #[error("unknown family `{0}`")]
    UnknownFamily(String),

    #[error("unknown parameter `{param}` for family `{family}`")]
    UnknownParameter { family: String, param: String },

    #[error("parameter `{param}` = {value} is outside its admissible range")]
    ParameterRange { param: String, value: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}
