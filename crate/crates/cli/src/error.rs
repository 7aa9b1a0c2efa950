use thiserror::Error;

/// CLI failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical error [{name}]: {message}")]
    Numerical { name: &'static str, message: String },

    #[error("golden check mismatch:\n{0}")]
    Golden(String),

    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    /// Library error raised while validating input.
    pub fn config(e: adacomp::Error) -> Self {
        CliError::Config(format!("[{}] {e}", e.name()))
    }

    /// Library error raised while running a policy.
    pub fn numerical(e: adacomp::Error) -> Self {
        CliError::Numerical {
            name: e.name(),
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Golden(_) => 4,
        }
    }
}
