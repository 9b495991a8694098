use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported schema header: {0}")]
    Schema(String),

    #[error("waveform {waveform_id} references unknown source {source_id:?}")]
    DanglingSource {
        waveform_id: String,
        source_id: String,
    },

    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },

    #[error("invalid record {id:?}: {message}")]
    InvalidRecord { id: String, message: String },

    #[error("trace format: {0}")]
    TraceFormat(String),

    #[error("invalid design: {0}")]
    Design(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cluster {cluster} exhausted: {message}")]
    ClusterExhausted { cluster: usize, message: String },

    #[error("metric {0} is undefined for these counts")]
    UndefinedMetric(&'static str),

    #[error("incomplete cell (model {model}, quantity {quantity}) in table {metric}")]
    IncompleteCell {
        metric: String,
        model: usize,
        quantity: usize,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
