use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] sure_amp::Error),

    #[error("{0} selftest check(s) failed")]
    Selftest(usize),
}

impl CliError {
    /// 2 for usage and configuration problems, 3 for numerical failures and 1
    /// for anything else.
    pub fn exit_code(&self) -> ExitCode {
        use sure_amp::Error as E;
        let code = match self {
            CliError::Usage(_) => 2,
            CliError::Core(E::Numerical(_)) => 3,
            CliError::Core(E::InvalidArgument(_) | E::ShapeMismatch { .. } | E::Format(_) | E::Io(_)) => 2,
            CliError::Core(E::Plugin { .. }) | CliError::Selftest(_) => 1,
        };
        ExitCode::from(code)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}
