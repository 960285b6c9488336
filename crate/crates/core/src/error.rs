use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure categories, used for CLI exit codes and the C ABI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Model,
    Numerical,
    Bridge,
    Io,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Model => 4,
            ErrorClass::Numerical => 5,
            ErrorClass::Bridge => 6,
            ErrorClass::Io => 7,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("column mismatch: expected {expected} columns, got {actual}")]
    ColumnMismatch { expected: usize, actual: usize },

    #[error("{players} players need {required} coalition evaluations, above the limit of {limit} players")]
    TooManyPlayers {
        players: usize,
        limit: usize,
        required: u128,
    },

    #[error("budget {budget} is too small: at least {minimum} design rows are required")]
    BudgetTooSmall { budget: usize, minimum: usize },

    #[error("invalid design: {0}")]
    Design(String),

    #[error("rank-deficient least-squares system ({0})")]
    RankDeficient(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("model returned a non-finite prediction at batch row {row} ({batch})")]
    NonFinitePrediction { batch: String, row: usize },

    #[error("model failed on batch {batch}: {message}")]
    Oracle { batch: String, message: String },

    #[error("model returned {actual} predictions for {expected} rows ({batch})")]
    PredictionLength {
        batch: String,
        expected: usize,
        actual: usize,
    },

    #[error("training failed: {0}")]
    Training(String),

    #[error("{} row(s) failed: {}", .0.len(), summarize_rows(.0))]
    Rows(Vec<(String, String)>),

    #[error("{failed} of {total} bootstrap replicates failed (limit 10%)")]
    BootstrapFailed { failed: usize, total: usize },

    #[error("bridge: {0}")]
    Bridge(String),

    #[error("bridge timed out after {seconds} s waiting for {waiting_for}")]
    BridgeTimeout { seconds: f64, waiting_for: String },

    #[error("bridge transport failed during request {id}: {message}")]
    BridgeTransport { id: u64, message: String },

    #[error("model capability missing: {0}")]
    Capability(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

fn summarize_rows(rows: &[(String, String)]) -> String {
    let shown: Vec<String> = rows
        .iter()
        .take(5)
        .map(|(id, msg)| format!("row {id}: {msg}"))
        .collect();
    let mut out = shown.join("; ");
    if rows.len() > 5 {
        out.push_str(&format!("; ... and {} more", rows.len() - 5));
    }
    out
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::BudgetTooSmall { .. } | Error::TooManyPlayers { .. } => {
                ErrorClass::Config
            }
            Error::Data(_) | Error::ColumnMismatch { .. } => ErrorClass::Data,
            Error::Oracle { .. }
            | Error::NonFinitePrediction { .. }
            | Error::PredictionLength { .. }
            | Error::Training(_)
            | Error::Capability(_)
            | Error::Rows(_)
            | Error::BootstrapFailed { .. } => ErrorClass::Model,
            Error::Design(_) | Error::RankDeficient(_) | Error::NonFinite(_) => {
                ErrorClass::Numerical
            }
            Error::Bridge(_) | Error::BridgeTimeout { .. } | Error::BridgeTransport { .. } => {
                ErrorClass::Bridge
            }
            Error::Io { .. } | Error::Serde(_) => ErrorClass::Io,
        }
    }
}
