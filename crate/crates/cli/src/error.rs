use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<prbox_core::Error> for CliError {
    fn from(err: prbox_core::Error) -> Self {
        use prbox_core::Error as E;
        match err {
            E::InvalidParameter { .. } | E::EmptyInventory => CliError::Config(err.to_string()),
            _ => CliError::Numerical(err.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
