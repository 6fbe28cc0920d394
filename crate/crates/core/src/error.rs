use thiserror::Error;

/// Unified error type for the pipeline.
///
/// Variants map onto process exit codes: configuration and shape problems
/// are caller mistakes (2), data/metric/training problems are runtime data
/// issues (3), and leakage is its own category (4) so that evaluation
/// harnesses can never mistake it for an ordinary failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("shape: {0}")]
    Shape(String),
    #[error("data: {0}")]
    Data(String),
    #[error("metric: {0}")]
    Metric(String),
    #[error("training: {0}")]
    Training(String),
    #[error("parse: {0}")]
    Parse(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("leakage: {0}")]
    Leakage(String),
}

impl Error {
    /// Process exit code for CLI surfaces: 0 ok, 2 config, 3 data, 4 leakage.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Shape(_) => 2,
            Error::Data(_)
            | Error::Metric(_)
            | Error::Training(_)
            | Error::Parse(_)
            | Error::Io(_) => 3,
            Error::Leakage(_) => 4,
        }
    }

    /// Short category tag used in machine-parsable CLI error lines.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Shape(_) => "shape",
            Error::Data(_) => "data",
            Error::Metric(_) => "metric",
            Error::Training(_) => "training",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Leakage(_) => "leakage",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
