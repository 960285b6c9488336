//! Reference model server speaking the bridge protocol around a built-in
//! model. Used by `geoshap serve` and by the protocol tests.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use super::protocol::Message;
use crate::error::{Error, Result};
use crate::game::PredictionOracle;
use crate::models::TrainedModel;

pub struct ModelServer {
    model: TrainedModel,
    trainable: bool,
}

impl ModelServer {
    pub fn new(model: TrainedModel, trainable: bool) -> Self {
        ModelServer { model, trainable }
    }

    pub fn model(&self) -> &TrainedModel {
        &self.model
    }

    pub fn ready(&self) -> Message {
        Message::Ready {
            n_columns: self.model.n_columns(),
            trainable: self.trainable,
            concurrency_safe: None,
        }
    }

    /// Reply to one request line; `None` means shut down.
    pub fn handle(&mut self, line: &str) -> Option<Message> {
        let msg = match Message::decode(line) {
            Ok(m) => m,
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|i| i.as_u64()));
                return Some(Message::Error {
                    id,
                    message: format!("malformed request: {e}"),
                });
            }
        };
        let fail = |id: u64, e: Error| Message::Error {
            id: Some(id),
            message: e.to_string(),
        };
        Some(match msg {
            Message::Shutdown => return None,
            Message::Predict { id, rows } => match to_matrix(&rows).and_then(|m| self.model.predict(&m)) {
                Ok(values) => Message::Prediction { id, values },
                Err(e) => fail(id, e),
            },
            Message::Fit { id, rows, targets } => {
                if !self.trainable {
                    return Some(fail(id, Error::Capability("this server was started without fitting".into())));
                }
                if targets.len() != rows.len() {
                    return Some(fail(
                        id,
                        Error::Data(format!("{} targets for {} rows", targets.len(), rows.len())),
                    ));
                }
                match to_matrix(&rows).and_then(|m| self.model.spec().train(&m, &targets)) {
                    Ok(model) => {
                        self.model = model;
                        Message::FitOk { id }
                    }
                    Err(e) => fail(id, e),
                }
            }
            other => Message::Error {
                id: None,
                message: format!("unexpected {} message", other.kind()),
            },
        })
    }

    /// Announces readiness, then answers requests until `shutdown` or end
    /// of input.
    pub fn serve(mut self, input: impl BufRead, mut output: impl Write) -> Result<()> {
        let io = |e| Error::io("<stdout>", e);
        output.write_all(self.ready().encode()?.as_bytes()).map_err(io)?;
        output.flush().map_err(io)?;
        for line in input.lines() {
            let line = line.map_err(|e| Error::io("<stdin>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            match self.handle(&line) {
                Some(reply) => {
                    output.write_all(reply.encode()?.as_bytes()).map_err(io)?;
                    output.flush().map_err(io)?;
                }
                None => break,
            }
        }
        Ok(())
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Data("ragged rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]))
}
