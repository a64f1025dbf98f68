use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular point: {0}")]
    Singular(String),
    #[error("grazing collision (|sin phi| = {0:e})")]
    Grazing(f64),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("table construction failed: {0}")]
    Construction(String),
    #[error("corner series extraction failed at index {index}: {msg}")]
    Extraction { index: usize, msg: String },
    #[error("segmentation failed: {0}")]
    Segmentation(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for measure-zero events (corners, grazing) that Monte-Carlo
    /// drivers discard and resample.
    pub fn is_singular(&self) -> bool {
        matches!(self, Error::Singular(_) | Error::Grazing(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
