use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid manifold file {path}: {message}")]
    Manifest { path: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] statman_core::Error),
}

impl CliError {
    /// 2 for unusable input, 3 for contradictory verdicts, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Read { .. } | CliError::Manifest { .. } | CliError::Usage(_) => 2,
            CliError::Core(statman_core::Error::Consistency(_)) => 3,
            CliError::Write { .. } | CliError::Core(_) => 1,
        }
    }
}
