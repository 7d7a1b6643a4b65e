use thiserror::Error;

/// Errors raised by survkit operations.
#[derive(Debug, Error)]
pub enum SurvError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("invalid value {value:?} in column `{column}` at row {row}")]
    InvalidCell {
        column: String,
        row: usize,
        value: String,
    },

    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("mandatory feature `{name}` has missing fraction {fraction:.3} above threshold {threshold}")]
    MandatoryMissing {
        name: String,
        fraction: f64,
        threshold: f64,
    },

    #[error("feature `{0}` is missing in every row")]
    AllMissing(String),

    #[error("collinear covariates: {0}")]
    Collinear(String),

    #[error("monotone likelihood: coefficient for `{feature}` diverged (|beta| = {magnitude:.3e})")]
    MonotoneLikelihood { feature: String, magnitude: f64 },

    #[error("solver diverged: {0}")]
    Diverged(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("input is not on the fitted model's scale: {0}")]
    UnscaledInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("calibration group {group} has Kaplan-Meier survival {value} at the horizon; ln(-ln) is undefined")]
    CalibrationGroup { group: usize, value: f64 },

    #[error("resampling failed: {0}")]
    Resampling(String),
}

impl SurvError {
    /// True for failures of numerical procedures as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SurvError::Collinear(_)
                | SurvError::MonotoneLikelihood { .. }
                | SurvError::Diverged(_)
                | SurvError::NonFinite(_)
                | SurvError::Resampling(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, SurvError>;
