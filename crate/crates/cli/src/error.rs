use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] srmkit::error::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Exit status for the error: every failure before a verdict is a
    /// configuration problem.
    pub fn exit_code(&self) -> i32 {
        2
    }
}
