use std::path::PathBuf;

/// Errors raised by file formats, configuration and the experiment runner.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{source_name}:{line}: {msg}")]
    Parse {
        source_name: String,
        line: usize,
        msg: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] signedprop_core::Error),

    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(source_name: &str, line: usize, msg: impl Into<String>) -> Self {
        Self::Parse {
            source_name: source_name.to_owned(),
            line,
            msg: msg.into(),
        }
    }

    /// Process exit status: 1 for failed checks and runtime failures, 2 for bad input.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::CheckFailed(_) | Self::Core(_) => 1,
            Self::Io { .. } | Self::Parse { .. } | Self::Config(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
