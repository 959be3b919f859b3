use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    /// A module error, tagged with the scenario field that caused it.
    #[error("{field}: {source}")]
    Analysis {
        field: String,
        #[source]
        source: ergoflow_core::Error,
    },
    #[error("unknown scenario `{0}` (not a file and not bundled)")]
    UnknownScenario(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

impl HarnessError {
    pub fn field(field: impl Into<String>, source: ergoflow_core::Error) -> Self {
        HarnessError::Analysis { field: field.into(), source }
    }

    pub fn io(path: impl std::fmt::Display, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
