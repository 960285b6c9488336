//! Explaining and retraining models that live in another process.
//!
//! The engine starts the model server as a child process and talks to it
//! over the child's standard input and output with line-delimited JSON
//! (see [`protocol::Message`]). Requests carry increasing ids and are sent
//! one at a time.

pub mod protocol;
pub mod server;

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use nalgebra::DMatrix;

pub use protocol::Message;

use crate::error::{Error, Result};
use crate::game::{PredictionOracle, Trainer};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// What the server declared in its `ready` message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub n_columns: usize,
    pub trainable: bool,
    pub concurrency_safe: bool,
}

/// How to start a model server.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerCommand {
    pub program: String,
    pub args: Vec<String>,
    pub timeout: Duration,
}

impl ServerCommand {
    /// A command line run through `sh -c`.
    pub fn shell(command: &str) -> Self {
        ServerCommand {
            program: "sh".into(),
            args: vec!["-c".into(), command.into()],
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        ServerCommand {
            program: program.into(),
            args,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

enum Line {
    Text(String),
    Closed,
    Failed(String),
}

/// One running server. Dropping the session asks the server to shut down.
pub struct BridgeSession {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<Line>,
    capabilities: Capabilities,
    timeout: Duration,
    next_id: u64,
    broken: bool,
}

impl std::fmt::Debug for BridgeSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BridgeSession")
            .field("pid", &self.child.id())
            .field("capabilities", &self.capabilities)
            .field("next_id", &self.next_id)
            .finish()
    }
}

impl BridgeSession {
    /// Starts the server and waits for its `ready` message.
    pub fn handshake(command: &ServerCommand) -> Result<Self> {
        let mut child = Command::new(&command.program)
            .args(&command.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Bridge(format!("cannot start `{}`: {e}", command.program)))?;
        let stdout = child.stdout.take().expect("piped stdout");
        let stdin = child.stdin.take();
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = String::new();
                let msg = match reader.read_line(&mut line) {
                    Ok(0) => Line::Closed,
                    Ok(_) => Line::Text(line),
                    Err(e) => Line::Failed(e.to_string()),
                };
                let done = !matches!(msg, Line::Text(_));
                if tx.send(msg).is_err() || done {
                    break;
                }
            }
        });
        let mut session = BridgeSession {
            child,
            stdin,
            lines: rx,
            capabilities: Capabilities {
                n_columns: 0,
                trainable: false,
                concurrency_safe: false,
            },
            timeout: command.timeout,
            next_id: 1,
            broken: false,
        };
        let line = match session.read_line("the ready message") {
            Ok(line) => line,
            Err(Error::BridgeTransport { message, .. }) => {
                return Err(Error::Bridge(format!("server exited before the handshake: {message}")))
            }
            Err(e) => return Err(e),
        };
        match Message::decode(&line) {
            Ok(Message::Ready {
                n_columns,
                trainable,
                concurrency_safe,
            }) => {
                session.capabilities = Capabilities {
                    n_columns,
                    trainable,
                    concurrency_safe: concurrency_safe.unwrap_or(false),
                };
                Ok(session)
            }
            Ok(Message::Error { message, .. }) => {
                Err(Error::Bridge(format!("server refused to start: {message}")))
            }
            _ => Err(Error::Bridge(format!(
                "malformed handshake, expected a ready message but got: {}",
                line.trim_end()
            ))),
        }
    }

    pub fn capabilities(&self) -> Capabilities {
        self.capabilities
    }

    /// Fails unless the server expects `n_columns` input columns.
    pub fn expect_columns(&self, n_columns: usize) -> Result<()> {
        if self.capabilities.n_columns != n_columns {
            return Err(Error::ColumnMismatch {
                expected: n_columns,
                actual: self.capabilities.n_columns,
            });
        }
        Ok(())
    }

    fn read_line(&mut self, waiting_for: &str) -> Result<String> {
        let id = self.next_id.saturating_sub(1);
        match self.lines.recv_timeout(self.timeout) {
            Ok(Line::Text(s)) => Ok(s),
            Ok(Line::Closed) | Err(RecvTimeoutError::Disconnected) => {
                self.broken = true;
                Err(Error::BridgeTransport {
                    id,
                    message: "server closed its output".into(),
                })
            }
            Ok(Line::Failed(e)) => {
                self.broken = true;
                Err(Error::BridgeTransport { id, message: e })
            }
            Err(RecvTimeoutError::Timeout) => {
                self.broken = true;
                Err(Error::BridgeTimeout {
                    seconds: self.timeout.as_secs_f64(),
                    waiting_for: waiting_for.to_string(),
                })
            }
        }
    }

    fn send(&mut self, id: u64, msg: &Message) -> Result<()> {
        let line = msg.encode()?;
        let stdin = self.stdin.as_mut().ok_or_else(|| Error::BridgeTransport {
            id,
            message: "server input already closed".into(),
        })?;
        if let Err(e) = stdin.write_all(line.as_bytes()).and_then(|_| stdin.flush()) {
            self.broken = true;
            return Err(Error::BridgeTransport {
                id,
                message: e.to_string(),
            });
        }
        Ok(())
    }

    fn request(&mut self, build: impl FnOnce(u64) -> Message) -> Result<(u64, Message)> {
        if self.broken {
            return Err(Error::Bridge("session is no longer usable after an earlier failure".into()));
        }
        let id = self.next_id;
        self.next_id += 1;
        let msg = build(id);
        let kind = msg.kind();
        self.send(id, &msg)?;
        let line = self.read_line(&format!("the reply to {kind} request {id}"))?;
        let reply = Message::decode(&line).map_err(|e| {
            self.broken = true;
            Error::Bridge(format!("unreadable reply to request {id} ({e}): {}", line.trim_end()))
        })?;
        if let Message::Error { id: rid, message } = &reply {
            if rid.is_some_and(|r| r != id) {
                self.broken = true;
            }
            return Err(Error::Oracle {
                batch: format!("bridge request {id}"),
                message: message.clone(),
            });
        }
        let rid = match &reply {
            Message::Prediction { id, .. } | Message::FitOk { id } => Some(*id),
            _ => None,
        };
        match rid {
            Some(r) if r == id => Ok((id, reply)),
            Some(r) => {
                self.broken = true;
                Err(Error::Bridge(format!("reply id {r} does not match request id {id}")))
            }
            None => {
                self.broken = true;
                Err(Error::Bridge(format!(
                    "unexpected {} message in reply to request {id}",
                    reply.kind()
                )))
            }
        }
    }

    fn rows_of(&self, rows: &DMatrix<f64>) -> Result<Vec<Vec<f64>>> {
        if rows.ncols() != self.capabilities.n_columns {
            return Err(Error::ColumnMismatch {
                expected: self.capabilities.n_columns,
                actual: rows.ncols(),
            });
        }
        Ok(rows.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    /// One prediction per row. An empty matrix is answered locally.
    pub fn predict(&mut self, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
        if rows.nrows() == 0 {
            return Ok(Vec::new());
        }
        let payload = self.rows_of(rows)?;
        let (id, reply) = self.request(|id| Message::Predict { id, rows: payload })?;
        let Message::Prediction { values, .. } = reply else {
            return Err(Error::Bridge(format!("request {id} was not answered with a prediction")));
        };
        if values.len() != rows.nrows() {
            return Err(Error::PredictionLength {
                batch: format!("bridge request {id}"),
                expected: rows.nrows(),
                actual: values.len(),
            });
        }
        if let Some(row) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinitePrediction {
                batch: format!("bridge request {id}"),
                row,
            });
        }
        Ok(values)
    }

    /// Retrains the remote model. Later predictions use the new fit.
    pub fn fit(&mut self, rows: &DMatrix<f64>, targets: &[f64]) -> Result<()> {
        if !self.capabilities.trainable {
            return Err(Error::Capability("the model server is not trainable".into()));
        }
        if targets.len() != rows.nrows() {
            return Err(Error::Bridge(format!(
                "fit request has {} targets for {} rows",
                targets.len(),
                rows.nrows()
            )));
        }
        let payload = self.rows_of(rows)?;
        let targets = targets.to_vec();
        let (id, reply) = self.request(|id| Message::Fit {
            id,
            rows: payload,
            targets,
        })?;
        match reply {
            Message::FitOk { .. } => Ok(()),
            other => Err(Error::Bridge(format!(
                "request {id} was answered with {} instead of fit_ok",
                other.kind()
            ))),
        }
    }

    /// Sends `shutdown` and waits briefly for the server to exit.
    pub fn shutdown(mut self) -> Result<()> {
        self.close()
    }

    fn close(&mut self) -> Result<()> {
        if self.stdin.is_some() {
            let _ = self.send(0, &Message::Shutdown);
            self.stdin = None;
        }
        for _ in 0..50 {
            if let Ok(Some(_)) = self.child.try_wait() {
                return Ok(());
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
        Ok(())
    }
}

impl Drop for BridgeSession {
    fn drop(&mut self) {
        let _ = self.close();
    }
}

/// A remote model used as a prediction oracle. Requests are serialized.
#[derive(Debug)]
pub struct BridgedOracle {
    session: Mutex<BridgeSession>,
    n_columns: usize,
}

impl BridgedOracle {
    pub fn new(session: BridgeSession) -> Self {
        let n_columns = session.capabilities().n_columns;
        BridgedOracle {
            session: Mutex::new(session),
            n_columns,
        }
    }

    pub fn connect(command: &ServerCommand) -> Result<Self> {
        Ok(BridgedOracle::new(BridgeSession::handshake(command)?))
    }

    pub fn capabilities(&self) -> Capabilities {
        self.lock().capabilities()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, BridgeSession> {
        self.session.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn fit(&self, rows: &DMatrix<f64>, targets: &[f64]) -> Result<()> {
        self.lock().fit(rows, targets)
    }
}

impl PredictionOracle for BridgedOracle {
    fn n_columns(&self) -> usize {
        self.n_columns
    }

    fn predict(&self, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.lock().predict(rows)
    }

    fn concurrency_safe(&self) -> bool {
        false
    }
}

/// Trains by starting a fresh server per fit, so parallel bootstrap
/// replicates never share a session.
#[derive(Debug, Clone)]
pub struct BridgedTrainer {
    pub command: ServerCommand,
}

impl Trainer for BridgedTrainer {
    fn fit(&self, x: &DMatrix<f64>, y: &[f64]) -> Result<Box<dyn PredictionOracle>> {
        let mut session = BridgeSession::handshake(&self.command)?;
        session.expect_columns(x.ncols())?;
        session.fit(x, y)?;
        Ok(Box::new(BridgedOracle::new(session)))
    }
}
