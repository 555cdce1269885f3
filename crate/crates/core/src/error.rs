use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("resolution too coarse: {what} needs at least {required}, have {actual}")]
    Resolution {
        what: String,
        required: f64,
        actual: f64,
    },

    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("truncation risk: {0}")]
    Margin(String),

    #[error("dyadic range misses contributing scales {missing:?}")]
    Coverage { missing: Vec<i32> },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

impl LabError {
    /// Guard violations are input that the modules refuse to compute on, as
    /// opposed to malformed parameters.
    pub fn is_guard(&self) -> bool {
        matches!(
            self,
            LabError::Resolution { .. }
                | LabError::SizeGuard(_)
                | LabError::Margin(_)
                | LabError::Coverage { .. }
                | LabError::Convergence(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
