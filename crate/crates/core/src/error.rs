use thiserror::Error;

/// Errors produced by the warm-up detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no steady state reached for {0}")]
    NoSteadyState(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("window mismatch: model expects {expected}, got {actual}")]
    WindowMismatch { expected: usize, actual: usize },

    #[error("missing configuration for {0}")]
    MissingConfig(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("empty fold {0}")]
    EmptyFold(usize),

    #[error("no information: all paired differences are zero")]
    NoInformation,

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Usage(_) => "usage",
            Error::InsufficientData(_) => "insufficient_data",
            Error::InvalidInput(_) => "invalid_input",
            Error::NoSteadyState(_) => "no_steady_state",
            Error::DegenerateLabels(_) => "degenerate_labels",
            Error::WindowMismatch { .. } => "window_mismatch",
            Error::MissingConfig(_) => "missing_config",
            Error::EmptyDataset => "empty_dataset",
            Error::EmptyFold(_) => "empty_fold",
            Error::NoInformation => "no_information",
            Error::ModelFormat(_) => "model_format",
            Error::Numerical(_) => "numerical",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    /// True for errors caused by bad input data rather than internal faults.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Usage(_) | Error::Numerical(_) | Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
