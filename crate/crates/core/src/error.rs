use thiserror::Error;

/// Errors raised by the simulator.
///
/// Variants split into configuration problems (bad input) and physics
/// problems (an infeasible profile, a run that blew up). The CLI maps the
/// two groups onto distinct exit codes via [`Error::is_physics`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("infeasible profile: {0}")]
    InfeasibleProfile(String),

    #[error("ions {i} and {j} coincide")]
    CoincidentIons { i: usize, j: usize },

    #[error("ramp schedule: {0}")]
    Schedule(String),

    #[error("evolution diverged at t = {time}")]
    Divergence { time: f64 },

    #[error("zero mode carries amplitude {amplitude:e}; frequency split undefined")]
    ZeroMode { amplitude: f64 },

    #[error("pulse placement: {0}")]
    Placement(String),

    #[error("pulse direction is ambiguous (group velocity {velocity:e})")]
    Direction { velocity: f64 },

    #[error("invalid Gaussian state: {0}")]
    InvalidState(String),

    #[error("run inconclusive: {0}")]
    Inconclusive(String),

    #[error("no horizon: {0}")]
    NoHorizon(String),
}

impl Error {
    pub(crate) fn config(key: &str, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            msg: msg.into(),
        }
    }

    /// True for failures of the physics rather than of the input.
    pub fn is_physics(&self) -> bool {
        !matches!(self, Error::Config { .. } | Error::Domain(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
