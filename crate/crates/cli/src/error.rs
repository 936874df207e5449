use std::path::PathBuf;

use spde_bridge_core::Error as CoreError;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(CoreError),

    #[error("{failed} of {total} validation checks failed")]
    ValidationFailed { failed: usize, total: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::ValidationFailed { .. } => 4,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps a core error raised while building objects from `section`.
    /// Bare parameter names get the section prefix so messages carry a full
    /// key path.
    pub fn in_section(section: &str, err: CoreError) -> Self {
        match err {
            CoreError::FactorizationFailure { .. } => CliError::Numerical(err),
            CoreError::InvalidParameter { name, reason } if !name.contains('.') => {
                CliError::Config(format!("invalid parameter `{section}.{name}`: {reason}"))
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::FactorizationFailure { .. } => CliError::Numerical(err),
            other => CliError::Config(other.to_string()),
        }
    }
}
