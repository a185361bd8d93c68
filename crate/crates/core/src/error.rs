use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the racing-game engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid track: {0}")]
    InvalidTrack(String),

    #[error("lap counter step too large: arclength jump {jump:.4} m exceeds half a lap ({half_lap:.4} m)")]
    StepTooLarge { jump: f64, half_lap: f64 },

    #[error("empty grid: {0}")]
    EmptyGrid(&'static str),

    #[error("invalid primitive library: {0}")]
    InvalidLibrary(String),

    #[error("horizon mismatch: {0} vs {1} steps")]
    HorizonMismatch(usize, usize),

    #[error("invalid game parameters: {0}")]
    InvalidParams(String),

    #[error("payoff domination violated: kappa={kappa}, lambda={lambda} must both be below the smallest progress {min_progress}")]
    Domination {
        kappa: f64,
        lambda: f64,
        min_progress: f64,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("viability kernel did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(line: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: PathBuf::from("<input>"),
            line,
            msg: msg.into(),
        }
    }

    /// Attaches a file path to a parse error.
    pub fn with_path(self, path: impl Into<PathBuf>) -> Self {
        match self {
            Error::Parse { line, msg, .. } => Error::Parse {
                path: path.into(),
                line,
                msg,
            },
            other => other,
        }
    }

    /// True when the error stems from malformed user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::NoConvergence(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
