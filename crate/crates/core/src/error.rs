use thiserror::Error;

use crate::model::Arm;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("no initiated participants in the {0} arm; the mITT estimator is undefined on this sample")]
    NoInitiators(Arm),

    #[error("the {0} arm has no records")]
    EmptyArm(Arm),

    #[error("the always-initiator stratum has zero probability; the principal stratum estimand is undefined")]
    UndefinedEstimand,

    #[error("the {0} analysis population has zero probability mass; the large-sample limit is undefined")]
    UndefinedLimit(Arm),

    #[error("the estimator is undefined for every {0}")]
    AllUndefined(&'static str),

    #[error("stratum membership needs both potential initiation indicators; observed data only carries one")]
    CounterfactualUnavailable,

    #[error("an assumption justification is required when the estimator is reported as appropriate")]
    MissingJustification,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Io(String),
}

impl Error {
    /// True when the error means an estimator or estimand has no value on the
    /// given input, as opposed to malformed input.
    pub fn is_undefined(&self) -> bool {
        matches!(
            self,
            Error::NoInitiators(_)
                | Error::EmptyArm(_)
                | Error::UndefinedEstimand
                | Error::UndefinedLimit(_)
                | Error::AllUndefined(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
