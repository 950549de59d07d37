use std::process::ExitCode;

use fbdeconv::ErrorKind;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        })
    }
}

impl From<fbdeconv::Error> for CliError {
    fn from(e: fbdeconv::Error) -> Self {
        let msg = e.to_string();
        match e.kind() {
            ErrorKind::Usage => CliError::Usage(msg),
            ErrorKind::Data => CliError::Data(msg),
            ErrorKind::Numerical => CliError::Numerical(msg),
        }
    }
}
