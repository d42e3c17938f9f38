use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] dualvar_core::Error),
}

impl CliError {
    /// A config error at `line`; line 0 marks values that did not come from
    /// a file (sweep overrides).
    pub fn config(line: usize, msg: impl Into<String>) -> Self {
        if line == 0 {
            CliError::Invalid(msg.into())
        } else {
            CliError::Config {
                line,
                msg: msg.into(),
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
