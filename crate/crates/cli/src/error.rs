use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] ssr_telescopy::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    ConfigParse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("failed to serialize report: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for bad input, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        use ssr_telescopy::Error as E;
        match self {
            CliError::Validation(_) | CliError::ConfigParse { .. } => 2,
            CliError::Core(
                E::InvalidDimension(_)
                | E::Shape(_)
                | E::Capacity { .. }
                | E::Unnormalized(_)
                | E::InvalidParameter(_)
                | E::Singular
                | E::Unsupported(_)
                | E::UnknownKind(_),
            ) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
