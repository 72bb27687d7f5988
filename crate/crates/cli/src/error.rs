use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}:{line}: {message}")]
    Config { path: String, line: usize, message: String },

    #[error("validation failed: {}", .0.join(", "))]
    Validation(Vec<String>),

    #[error("{0}")]
    NonConvergence(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] ris_secrecy::Error),
}

impl CliError {
    /// Process exit status: 1 usage or configuration, 2 validation
    /// failure, 3 numerical non-convergence.
    pub fn exit_code(&self) -> i32 {
        use ris_secrecy::Error as E;
        match self {
            Self::Usage(_) | Self::Config { .. } | Self::Io { .. } => 1,
            Self::Validation(_) => 2,
            Self::NonConvergence(_) => 3,
            Self::Core(E::Argument(_) | E::Domain(_)) => 1,
            Self::Core(_) => 3,
        }
    }
}
