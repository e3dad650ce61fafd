use crate::spec_file::SpecError;

/// Exit codes: 0 success, 1 threshold violation, 2 usage or validation,
/// 3 internal.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Model(#[from] remlab::Error),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Spec(_) => 2,
            CliError::Model(remlab::Error::Mismatch(_)) => 3,
            CliError::Model(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Internal(format!("{}: {e}", path.display()))
    }
}
