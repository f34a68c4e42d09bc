//! Conformance battery for external scorer backends.

use serde::Serialize;
use serde_json::Value;

use super::external::{
    check_hello, hello_request, parse_probability_response, parse_train_reply, predict_request, train_request,
    Channel, Direction, ExternalConfig,
};
use crate::corpus::{AnswerSpan, ContextDoc, Sample};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub check: String,
    pub message: String,
    /// The offending transcript line (empty when nothing was received).
    pub line: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ProtocolReport {
    pub checks_run: usize,
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
    /// `(">" | "<", line)` pairs in exchange order.
    pub transcript: Vec<(String, String)>,
}

impl ProtocolReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Requests every conformant backend must answer.
pub fn golden_battery() -> Vec<(&'static str, String, ContextDoc)> {
    let long: String = (0..120).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
    vec![
        ("single-token", "Where?".into(), ContextDoc::new("g0", "Paris")),
        (
            "sentence",
            "Where is the Eiffel Tower?".into(),
            ContextDoc::new("g1", "The Eiffel Tower is located in Paris, France."),
        ),
        (
            "unicode",
            "Where did Caf\u{e9} M\u{fc}ller open?".into(),
            ContextDoc::new("g2", "Caf\u{e9} M\u{fc}ller opened in Z\u{fc}rich in 1921."),
        ),
        ("empty-question", String::new(), ContextDoc::new("g3", "Alpha beta gamma delta")),
        ("long-context", "Which word comes last?".into(), ContextDoc::new("g4", long)),
    ]
}

const MALFORMED_LINE: &str = "{\"id\": \"bad\", this is not json";

fn violation(check: &str, err: &Error, fallback_line: &str) -> Violation {
    match err {
        Error::Protocol { message, line } => Violation {
            check: check.into(),
            message: message.clone(),
            line: line.clone(),
        },
        other => Violation {
            check: check.into(),
            message: other.to_string(),
            line: fallback_line.into(),
        },
    }
}

/// Runs the handshake, the golden requests, malformed-line recovery and the
/// optional train control against a freshly launched backend.
pub fn protocol_check(config: &ExternalConfig) -> ProtocolReport {
    let mut report = ProtocolReport::default();
    let mut channel = match Channel::spawn(config) {
        Ok(c) => c,
        Err(e) => {
            report.checks_run = 1;
            report.violations.push(violation("launch", &e, ""));
            return report;
        }
    };
    channel.transcript = Some(Vec::new());
    run_battery(&mut channel, &mut report);
    report.transcript = channel
        .transcript
        .take()
        .unwrap_or_default()
        .into_iter()
        .map(|(d, l)| (if d == Direction::Sent { ">" } else { "<" }.to_string(), l))
        .collect();
    report
}

fn run_battery(channel: &mut Channel, report: &mut ProtocolReport) {
    report.checks_run += 1;
    if let Err(e) = channel.exchange(&hello_request()).and_then(|reply| check_hello(&reply)) {
        report.violations.push(violation("handshake", &e, ""));
        return;
    }

    let battery = golden_battery();
    for (i, (name, question, doc)) in battery.iter().enumerate() {
        report.checks_run += 1;
        let id = format!("golden-{i}");
        let result = channel
            .exchange(&predict_request(&id, question, doc))
            .and_then(|reply| parse_probability_response(&reply, &id, doc.n_tokens()));
        match result {
            Ok(r) if r.renormalized => report.warnings.push(format!("{name}: probabilities did not sum to 1")),
            Ok(_) => {}
            Err(e) => {
                let fatal = !matches!(e, Error::Protocol { .. });
                report.violations.push(violation(name, &e, ""));
                if fatal {
                    return;
                }
            }
        }
    }

    report.checks_run += 1;
    match channel.exchange(MALFORMED_LINE) {
        Ok(reply) => {
            let is_error_object = serde_json::from_str::<Value>(&reply)
                .ok()
                .is_some_and(|v| v.get("error").is_some_and(Value::is_string) && v.get("id").is_some());
            if !is_error_object {
                report.violations.push(Violation {
                    check: "malformed-line".into(),
                    message: "malformed request must yield an {\"id\", \"error\"} object".into(),
                    line: reply,
                });
            }
        }
        Err(e) => {
            report.violations.push(violation("malformed-line", &e, MALFORMED_LINE));
            return;
        }
    }

    report.checks_run += 1;
    let (_, question, doc) = &battery[1];
    let id = "recovery";
    if let Err(e) = channel
        .exchange(&predict_request(id, question, doc))
        .and_then(|reply| parse_probability_response(&reply, id, doc.n_tokens()))
    {
        report.violations.push(violation("recovery", &e, ""));
        return;
    }

    report.checks_run += 1;
    let answer = AnswerSpan::locate(doc, "Paris", 31).expect("golden answer anchored");
    let sample = Sample {
        sample_id: "train-0".into(),
        question: question.clone(),
        doc_id: doc.doc_id.clone(),
        gold_answers: vec![answer],
    };
    if let Err(e) = channel
        .exchange(&train_request(&[(&sample, doc)]))
        .and_then(|reply| parse_train_reply(&reply))
    {
        report.violations.push(violation("train-control", &e, ""));
    }
}
