//! Client for external scorer processes speaking line-delimited JSON over
//! stdin/stdout.
//!
//! ```text
//! -> {"cmd": "hello", "protocol": 1}
//! <- {"cmd": "hello", "protocol": 1}
//! -> {"id": "r0", "question": "...", "context": "...", "n_tokens": 3, "token_offsets": [[0,5],[6,8],[9,12]]}
//! <- {"id": "r0", "start_probs": [...], "end_probs": [...]}
//! -> {"cmd": "train", "samples": [...]}
//! <- {"cmd": "train", "status": "ok"}   or   {"cmd": "unsupported"}
//! ```

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::prediction::SpanPrediction;
use crate::corpus::{ContextDoc, Sample};
use crate::{Error, Result};

pub const PROTOCOL_VERSION: u64 = 1;
/// Probability sums further than this from 1 are renormalized with a warning.
pub const RENORMALIZE_WARN_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalConfig {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    DEFAULT_TIMEOUT.as_secs()
}

impl ExternalConfig {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            command,
            timeout_secs: default_timeout_secs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Sent,
    Received,
}

/// A spawned backend process with a line reader thread.
pub(crate) struct Channel {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    pub(crate) transcript: Option<Vec<(Direction, String)>>,
}

impl Channel {
    pub(crate) fn spawn(config: &ExternalConfig) -> Result<Self> {
        let (program, args) = config
            .command
            .split_first()
            .ok_or_else(|| Error::Config("empty scorer backend command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Backend(format!("cannot launch {program}: {e}")))?;
        let stdout = child.stdout.take().expect("stdout piped");
        let stdin = child.stdin.take();
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines: rx,
            timeout: Duration::from_secs(config.timeout_secs.max(1)),
            transcript: None,
        })
    }

    fn record(&mut self, direction: Direction, line: &str) {
        if let Some(t) = &mut self.transcript {
            t.push((direction, line.to_string()));
        }
    }

    pub(crate) fn send(&mut self, line: &str) -> Result<()> {
        self.record(Direction::Sent, line);
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| Error::Backend("backend stdin closed".into()))?;
        writeln!(stdin, "{line}")
            .and_then(|_| stdin.flush())
            .map_err(|e| Error::Backend(format!("cannot write to backend: {e}")))
    }

    pub(crate) fn recv(&mut self) -> Result<String> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => {
                self.record(Direction::Received, &line);
                Ok(line)
            }
            Ok(Err(e)) => Err(Error::Backend(format!("cannot read from backend: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Error::Backend(format!(
                "no response within {} s",
                self.timeout.as_secs()
            ))),
            Err(RecvTimeoutError::Disconnected) => Err(Error::Backend("backend closed its output".into())),
        }
    }

    pub(crate) fn exchange(&mut self, line: &str) -> Result<String> {
        self.send(line)?;
        self.recv()
    }
}

impl Drop for Channel {
    fn drop(&mut self) {
        drop(self.stdin.take());
        for _ in 0..20 {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn protocol_error(message: impl Into<String>, line: &str) -> Error {
    Error::Protocol {
        message: message.into(),
        line: line.to_string(),
    }
}

pub(crate) fn hello_request() -> String {
    json!({"cmd": "hello", "protocol": PROTOCOL_VERSION}).to_string()
}

pub(crate) fn check_hello(line: &str) -> Result<()> {
    let value: Value = serde_json::from_str(line).map_err(|e| protocol_error(format!("handshake reply is not JSON: {e}"), line))?;
    match value.get("protocol").and_then(Value::as_u64) {
        Some(PROTOCOL_VERSION) => Ok(()),
        Some(v) => Err(protocol_error(format!("backend speaks protocol {v}, expected {PROTOCOL_VERSION}"), line)),
        None => Err(protocol_error("handshake reply does not echo the protocol version", line)),
    }
}

pub(crate) fn predict_request(id: &str, question: &str, doc: &ContextDoc) -> String {
    let offsets: Vec<[usize; 2]> = doc.tokens.iter().map(|t| [t.char_start, t.char_end]).collect();
    json!({
        "id": id,
        "question": question,
        "context": doc.text,
        "n_tokens": doc.n_tokens(),
        "token_offsets": offsets,
    })
    .to_string()
}

pub(crate) fn train_request(samples: &[(&Sample, &ContextDoc)]) -> String {
    let samples: Vec<Value> = samples
        .iter()
        .map(|(s, doc)| {
            json!({
                "id": s.sample_id,
                "question": s.question,
                "context": doc.text,
                "answers": s.gold_answers.iter().map(|a| json!({"text": a.text, "answer_start": a.char_start})).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({"cmd": "train", "samples": samples}).to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainOutcome {
    Trained,
    Unsupported,
}

pub(crate) fn parse_train_reply(line: &str) -> Result<TrainOutcome> {
    let value: Value = serde_json::from_str(line).map_err(|e| protocol_error(format!("train reply is not JSON: {e}"), line))?;
    match (value.get("cmd").and_then(Value::as_str), value.get("status").and_then(Value::as_str)) {
        (Some("unsupported"), _) => Ok(TrainOutcome::Unsupported),
        (Some("train"), Some("ok")) => Ok(TrainOutcome::Trained),
        _ => Err(protocol_error("train reply is neither {\"cmd\":\"train\",\"status\":\"ok\"} nor {\"cmd\":\"unsupported\"}", line)),
    }
}

/// Validated and renormalized start/end vectors from one response line.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityResponse {
    pub start_probs: Vec<f64>,
    pub end_probs: Vec<f64>,
    /// Set when either raw sum deviated from 1 by more than
    /// [`RENORMALIZE_WARN_TOLERANCE`].
    pub renormalized: bool,
}

fn probability_vector(value: &Value, field: &str, n_tokens: usize, line: &str) -> Result<(Vec<f64>, bool)> {
    let items = value
        .get(field)
        .and_then(Value::as_array)
        .ok_or_else(|| protocol_error(format!("response lacks an array field {field:?}"), line))?;
    if items.len() != n_tokens {
        return Err(protocol_error(
            format!("{field} has {} entries, expected n_tokens = {n_tokens}", items.len()),
            line,
        ));
    }
    let mut probs = Vec::with_capacity(n_tokens);
    for item in items {
        match item.as_f64() {
            Some(v) if v.is_finite() && v >= 0.0 => probs.push(v),
            _ => return Err(protocol_error(format!("{field} holds a non-probability entry {item}"), line)),
        }
    }
    let total: f64 = probs.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(protocol_error(format!("{field} sums to {total}"), line));
    }
    let deviates = (total - 1.0).abs() > RENORMALIZE_WARN_TOLERANCE;
    probs.iter_mut().for_each(|p| *p /= total);
    Ok((probs, deviates))
}

pub fn parse_probability_response(line: &str, expected_id: &str, n_tokens: usize) -> Result<ProbabilityResponse> {
    let value: Value = serde_json::from_str(line).map_err(|e| protocol_error(format!("response is not JSON: {e}"), line))?;
    match value.get("id").and_then(Value::as_str) {
        Some(id) if id == expected_id => {}
        Some(id) => return Err(protocol_error(format!("response id {id:?} does not echo request id {expected_id:?}"), line)),
        None => return Err(protocol_error("response has no string id", line)),
    }
    if let Some(err) = value.get("error") {
        return Err(protocol_error(format!("backend reported an error: {err}"), line));
    }
    let (start_probs, a) = probability_vector(&value, "start_probs", n_tokens, line)?;
    let (end_probs, b) = probability_vector(&value, "end_probs", n_tokens, line)?;
    Ok(ProbabilityResponse {
        start_probs,
        end_probs,
        renormalized: a || b,
    })
}

/// A running backend. Requests on one process are serialized.
pub struct ExternalScorer {
    config: ExternalConfig,
    channel: Mutex<Channel>,
    next_id: AtomicU64,
    frozen: AtomicBool,
    max_span_len: usize,
}

impl std::fmt::Debug for ExternalScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalScorer")
            .field("command", &self.config.command)
            .field("frozen", &self.is_frozen())
            .finish()
    }
}

impl ExternalScorer {
    /// Launches the backend and performs the handshake.
    pub fn spawn(config: ExternalConfig, max_span_len: usize) -> Result<Self> {
        let mut channel = Channel::spawn(&config)?;
        let reply = channel.exchange(&hello_request())?;
        check_hello(&reply)?;
        Ok(Self {
            config,
            channel: Mutex::new(channel),
            next_id: AtomicU64::new(0),
            frozen: AtomicBool::new(false),
            max_span_len,
        })
    }

    pub fn config(&self) -> &ExternalConfig {
        &self.config
    }

    /// True once the backend declined a train command.
    pub fn is_frozen(&self) -> bool {
        self.frozen.load(Ordering::Relaxed)
    }

    pub fn predict(&self, question: &str, doc: &ContextDoc) -> Result<SpanPrediction<f64>> {
        let id = format!("r{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let reply = {
            let mut channel = self.channel.lock().expect("scorer channel poisoned");
            channel.exchange(&predict_request(&id, question, doc))?
        };
        let response = parse_probability_response(&reply, &id, doc.n_tokens())?;
        if response.renormalized {
            log::warn!("backend probabilities for request {id} did not sum to 1; renormalized");
        }
        SpanPrediction::from_distributions(response.start_probs, response.end_probs, doc, self.max_span_len)
    }

    /// Asks the backend to retrain. A backend that declines is frozen and
    /// never asked again.
    pub fn train(&self, samples: &[(&Sample, &ContextDoc)]) -> Result<TrainOutcome> {
        if self.is_frozen() {
            return Ok(TrainOutcome::Unsupported);
        }
        let reply = {
            let mut channel = self.channel.lock().expect("scorer channel poisoned");
            channel.exchange(&train_request(samples))?
        };
        let outcome = parse_train_reply(&reply)?;
        if outcome == TrainOutcome::Unsupported {
            log::info!("scorer backend declined training; treating it as frozen");
            self.frozen.store(true, Ordering::Relaxed);
        }
        Ok(outcome)
    }
}
