use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unphysical state: {0}")]
    Unphysical(String),

    #[error("channel plan infeasible: channel {index} signal frequency {signal_thz} THz is at or past degeneracy ({degeneracy_thz} THz)")]
    PlanInfeasible {
        index: usize,
        signal_thz: f64,
        degeneracy_thz: f64,
    },

    #[error("no phase information: |rho_03| = {coherence:e} is below threshold")]
    NoPhaseInformation { coherence: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}
