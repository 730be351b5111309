use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration: {0}")]
    Config(String),
    #[error("numeric guard: {0}")]
    Guard(String),
    #[error("negative spectrum entry {value} at mode {mode}")]
    NegativeSpectrum { mode: usize, value: f64 },
    #[error("ensemble of size {0} is too small")]
    DegenerateEnsemble(usize),
    #[error("mismatched grids: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Core(#[from] wickkin_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("format: {0}")]
    Format(String),
}

impl Error {
    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) | Error::Mismatch(_) => 2,
            Error::Guard(_) | Error::NegativeSpectrum { .. } | Error::DegenerateEnsemble(_) => 3,
            Error::Core(e) => match e {
                wickkin_core::Error::InvalidModel(_)
                | wickkin_core::Error::DuplicateLabel(_)
                | wickkin_core::Error::UnknownVariable(_)
                | wickkin_core::Error::MissingCumulant(_)
                | wickkin_core::Error::NonSymmetricCovariance(..)
                | wickkin_core::Error::EmptySequence => 2,
                _ => 3,
            },
            Error::Io(_) | Error::Csv(_) | Error::Format(_) => 4,
        }
    }
}
