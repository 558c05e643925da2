use thiserror::Error;
use vislineup_server::ApiError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Domain(#[from] vislineup::Error),
    #[error("{}", .0.message)]
    Server(ApiError),
    /// Flag combinations clap cannot express.
    #[error("{0}")]
    Usage(String),
}

impl From<ApiError> for CliError {
    fn from(e: ApiError) -> Self {
        CliError::Server(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Domain(vislineup::Error::Parse(e.to_string()))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Domain(vislineup::Error::Parse(e.to_string()))
    }
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Domain(e) => e.code(),
            CliError::Server(e) => e.code,
            CliError::Usage(_) => "USAGE",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
