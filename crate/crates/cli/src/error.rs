use survkit::SurvError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Survival(#[from] SurvError),

    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("the report has no data for the `{0}` plot")]
    MissingPlotData(String),

    #[error("cannot read report: {0}")]
    Report(String),

    #[error("json encoding failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Process exit code: 1 usage or configuration, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::MissingPlotData(_) => 1,
            CliError::Survival(e) if e.is_numerical() => 3,
            CliError::Survival(SurvError::CalibrationGroup { .. }) => 3,
            CliError::Survival(_) | CliError::Output { .. } | CliError::Report(_) | CliError::Json(_) => 2,
        }
    }
}
