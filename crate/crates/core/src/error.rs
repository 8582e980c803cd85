use thiserror::Error;

/// Errors raised by the simulator.
///
/// Variants fall in two families: invalid input (bad parameters, unknown
/// axes, malformed configs) and numerical validity (wrapped ridges, null
/// postselection outcomes). The CLI maps the two families onto distinct exit
/// codes, see [`Error::is_numerical`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unknown axis `{0}`")]
    UnknownAxis(String),

    #[error("shape mismatch: {0}")]
    Mismatch(String),

    #[error("ridge wraps across the periodic seam: {0}")]
    Wrapped(String),

    #[error("postselection on null outcome (probability {probability:e})")]
    NullPostselection { probability: f64 },

    #[error("zero-norm state")]
    ZeroNorm,

    #[error("degenerate density: {0}")]
    Degenerate(String),

    #[error("no physical collision solution: {0}")]
    NoSolution(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of numerical validity rather than of input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Wrapped(_)
                | Error::NullPostselection { .. }
                | Error::ZeroNorm
                | Error::Degenerate(_)
                | Error::NoSolution(_)
        )
    }

    /// Short stable identifier used in machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::UnknownAxis(_) => "unknown_axis",
            Error::Mismatch(_) => "mismatch",
            Error::Wrapped(_) => "wrapped",
            Error::NullPostselection { .. } => "null_postselection",
            Error::ZeroNorm => "zero_norm",
            Error::Degenerate(_) => "degenerate",
            Error::NoSolution(_) => "no_solution",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
