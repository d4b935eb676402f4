use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Non-finite or otherwise out-of-domain numeric input.
    #[error("domain error: {0}")]
    Domain(String),

    /// Arguments that violate an operation's contract (lengths, resolutions, ranges).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A documented precondition does not hold (duplicate positions, non-monotone data, ...).
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A mass became non-positive; the integrator left the well-posed regime.
    #[error("mass collapse at particle {index} (t = {time}, m = {mass})")]
    Collapse { index: usize, time: f64, mass: f64 },

    /// Iterative solver failure (divergence, non-convergence).
    #[error("solver failure: {0}")]
    Solver(String),

    /// A Picard window was too long for the iterate to stay inside its envelope.
    #[error("window [{start}, {end}] too long: {reason}")]
    WindowTooLong {
        start: f64,
        end: f64,
        reason: String,
    },

    /// Problem size exceeds a solver's supported capacity.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Cell quadrature did not reach the requested tolerance.
    #[error("quadrature did not converge in cell {cell}: estimated error {error:e}")]
    Quadrature { cell: usize, error: f64 },

    /// Configuration file problems, with the offending line when known.
    #[error("configuration error{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config {
        line: Option<usize>,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub fn config(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: msg.into(),
        }
    }
}
