use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An integration step produced NaN or infinity.
    #[error("integrator blow-up: non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// A tabulated system was evaluated outside the time span of its table.
    #[error("time {t} is outside the tabulated range [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },

    #[error("table error: {0}")]
    Table(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
