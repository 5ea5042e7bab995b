use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Shapes or dimensions of the inputs do not agree.
    DimensionMismatch { expected: usize, found: usize, what: &'static str },
    /// An argument violates a documented precondition.
    InvalidArgument(String),
    /// The problem data uses a construct the catalog forbids in that position.
    InvalidSpec(String),
    /// A coefficient term produced a non-finite intermediate.
    NumericRange { term: String },
    /// The explicit scheme lost stability.
    BlowUp { step: usize, node: usize, value: f64 },
    /// The solver only supports scalar space and scalar noise.
    UnsupportedDimension { dim_x: usize, dim_b: usize },
    /// The lattice only supports `b = h = 0`, `sigma = 1`.
    UnsupportedForward(String),
    /// The Cesaro mean did not settle before the maximal horizon.
    AveragingFailure { residuals: Vec<f64> },
    /// A structural property that the scheme must satisfy was violated.
    PropertyFailure(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found, what } => {
                write!(f, "dimension mismatch for {what}: expected {expected}, found {found}")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::InvalidSpec(msg) => write!(f, "invalid problem spec: {msg}"),
            Error::NumericRange { term } => write!(f, "non-finite value while evaluating {term}"),
            Error::BlowUp { step, node, value } => {
                write!(f, "scheme blew up at step {step}, node {node} (value {value})")
            }
            Error::UnsupportedDimension { dim_x, dim_b } => write!(
                f,
                "unsupported dimension: solver needs dim_x = dim_b = 1, got {dim_x} and {dim_b}"
            ),
            Error::UnsupportedForward(msg) => write!(f, "unsupported forward coefficients: {msg}"),
            Error::AveragingFailure { residuals } => write!(
                f,
                "Cesaro average did not converge, last residual {:e} after {} doublings",
                residuals.last().copied().unwrap_or(f64::NAN),
                residuals.len()
            ),
            Error::PropertyFailure(msg) => write!(f, "property violated: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
