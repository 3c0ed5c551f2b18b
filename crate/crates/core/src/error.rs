use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Matrix shapes or data inconsistent with the declared model.
    InvalidModel(String),
    /// Vector or matrix length does not match the substructure.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// A matrix required to be nonsingular is (numerically) singular.
    Singular(String),
    /// More retained modes requested than internal DOFs exist.
    ModeCount { requested: usize, available: usize },
    InvalidConfig(String),
    InvalidTopology(String),
    /// The divergence detector fired.
    Diverged { step: usize, time: f64, norm: f64 },
    /// A mode shape with zero norm was passed to a metric.
    ZeroNormMode { index: usize },
    LengthMismatch { left: usize, right: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidModel(msg) => write!(f, "invalid model: {msg}"),
            Error::DimensionMismatch {
                what,
                expected,
                found,
            } => write!(f, "{what}: expected dimension {expected}, found {found}"),
            Error::Singular(msg) => write!(f, "singular matrix: {msg}"),
            Error::ModeCount {
                requested,
                available,
            } => write!(
                f,
                "requested {requested} retained modes but only {available} internal DOFs exist"
            ),
            Error::InvalidConfig(msg) => write!(f, "invalid solver configuration: {msg}"),
            Error::InvalidTopology(msg) => write!(f, "invalid coupling topology: {msg}"),
            Error::Diverged { step, time, norm } => write!(
                f,
                "solution diverged at step {step} (t = {time} s, state norm {norm:e})"
            ),
            Error::ZeroNormMode { index } => write!(f, "mode {index} has zero norm"),
            Error::LengthMismatch { left, right } => {
                write!(f, "signal lengths differ: {left} vs {right}")
            }
        }
    }
}

impl core::error::Error for Error {}
