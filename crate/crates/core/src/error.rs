use thiserror::Error;

/// Errors raised by the library. Dynamic outcomes of an orbit (chaos,
/// escape, resonance) are classifications, not errors; these variants cover
/// invalid inputs and numerical breakdown.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid map parameters: {0}")]
    InvalidParams(String),

    #[error("window length must be at least 2, got {0}")]
    WindowTooShort(usize),

    #[error("orbit stream has {got} samples but the weight plan expects {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("orbit diverged at step {step} (y = {y})")]
    Diverged { step: u64, y: f64 },

    #[error("degenerate resonance: m = (0, 0)")]
    DegenerateResonance,

    #[error("precision rho must lie in (0, 1), got {0}")]
    InvalidPrecision(f64),

    #[error("no resonance with distance <= {rho} found up to order {m_max}")]
    NoResonanceFound { rho: f64, m_max: u64 },

    #[error("q_max = {q_max} exceeds the precision bound {bound} implied by the input uncertainty")]
    PrecisionBound { q_max: u64, bound: f64 },

    #[error("unknown cubic field or variant: {0}")]
    UnknownField(String),

    #[error("division by zero in cubic field arithmetic")]
    ZeroDivision,

    #[error("could not generate a basis with nonzero third component after {0} attempts")]
    BasisRegeneration(usize),

    #[error("torus solve did not converge in {iterations} iterations (best residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("torus lost: dig = {dig} at the solution")]
    TorusLost { dig: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io: {0}")]
    Io(String),

    #[error("format: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
