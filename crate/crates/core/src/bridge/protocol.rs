//! Wire messages. One JSON object per line, UTF-8, `\n` terminated.

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Ready {
        n_columns: usize,
        trainable: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        concurrency_safe: Option<bool>,
    },
    Predict {
        id: u64,
        rows: Vec<Vec<f64>>,
    },
    Prediction {
        id: u64,
        values: Vec<f64>,
    },
    Fit {
        id: u64,
        rows: Vec<Vec<f64>>,
        targets: Vec<f64>,
    },
    FitOk {
        id: u64,
    },
    Shutdown,
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        message: String,
    },
}

impl Message {
    /// The line to write, including its trailing newline. Floats use the
    /// shortest representation that parses back to the same value.
    pub fn encode(&self) -> Result<String> {
        let mut line = serde_json::to_string(self)?;
        line.push('\n');
        Ok(line)
    }

    pub fn decode(line: &str) -> std::result::Result<Message, serde_json::Error> {
        serde_json::from_str(line.trim_end_matches(['\r', '\n']))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Message::Ready { .. } => "ready",
            Message::Predict { .. } => "predict",
            Message::Prediction { .. } => "prediction",
            Message::Fit { .. } => "fit",
            Message::FitOk { .. } => "fit_ok",
            Message::Shutdown => "shutdown",
            Message::Error { .. } => "error",
        }
    }
}
