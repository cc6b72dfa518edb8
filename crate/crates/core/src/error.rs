use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shift x + t^beta mu is undefined at t = 0 with beta = {beta} (beta must be > 0)")]
    UndefinedShift { beta: f64 },

    #[error("phase law {0} is not invertible: it fails the monotonicity hypotheses")]
    NotInvertible(String),

    #[error("value {y} is outside the range of {law} on (1e-12, 1e9] (max {max})")]
    OutOfRange { law: String, y: f64, max: f64 },

    /// A theorem or lemma hypothesis is not met by the requested parameters.
    #[error("{theorem}: hypothesis violated, {requirement} required")]
    HypothesisViolation {
        theorem: String,
        requirement: String,
    },

    #[error("scan too small: xi_max = {xi_max} but the transition region needs >= {required}")]
    ScanTooSmall { xi_max: f64, required: f64 },

    #[error("grid mismatch: nearest grid mode is {distance} from the argmax, spacing is {dxi}")]
    GridMismatch { distance: f64, dxi: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn hypothesis(theorem: impl Into<String>, requirement: impl Into<String>) -> Self {
        Error::HypothesisViolation {
            theorem: theorem.into(),
            requirement: requirement.into(),
        }
    }
}
