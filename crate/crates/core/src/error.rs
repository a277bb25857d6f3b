use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Caller passed arguments that violate an operation's preconditions.
    #[error("usage: {0}")]
    Usage(String),

    /// Input data failed parsing or validation.
    #[error("data: {0}")]
    Data(String),

    /// Parse or validation failure pinned to a cell of a CSV file.
    #[error("data: row {row}, column `{column}`: {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },

    /// The request exceeds what the implementation supports (e.g. too many
    /// nodes for exhaustive enumeration).
    #[error("capability: {0}")]
    Capability(String),

    /// A graph invariant was broken (a cycle in something built as a DAG).
    #[error("structure: {0}")]
    Structural(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A local fit failed; carries the node it was fitting.
    #[error("node {node} (`{name}`): {source}")]
    Node {
        node: usize,
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category name.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Usage(_) => "usage",
            Error::Data(_) | Error::Cell { .. } | Error::Json(_) => "data",
            Error::Capability(_) => "capability",
            Error::Structural(_) => "structure",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Node { source, .. } => source.code(),
            Error::Io { .. } => "io",
        }
    }
}
