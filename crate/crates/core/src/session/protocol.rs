//! Messages exchanged with live clients over a web socket.
//!
//! Every text frame is one JSON envelope `{"type", "session_id", "payload"}`.
//! Clients send `start_session` (with a null session id) followed by
//! `input_frame` messages; the server answers with `snapshot`, `event`,
//! `report` and `error` messages carrying the session id it assigned.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::engine::StateSnapshot;
use super::input::InputFrame;
use crate::scenario::SessionEvent;
use crate::scoring::Report;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSession {
    pub scenario_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// The text was not a valid envelope.
    Malformed,
    UnknownScenario,
    /// `input_frame` before `start_session`, or a second `start_session`.
    NoSession,
    SessionExists,
    /// The frame was dropped; the session continues.
    OutOfOrder,
    InvalidFrame,
    /// The session already finished.
    Halted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorPayload {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    StartSession(StartSession),
    InputFrame(InputFrame),
    Snapshot(Box<StateSnapshot>),
    Event(SessionEvent),
    Report(Report),
    Error(ErrorPayload),
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::StartSession(_) => "start_session",
            Message::InputFrame(_) => "input_frame",
            Message::Snapshot(_) => "snapshot",
            Message::Event(_) => "event",
            Message::Report(_) => "report",
            Message::Error(_) => "error",
        }
    }

    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        Message::Error(ErrorPayload {
            code,
            message: message.into(),
        })
    }
}

#[derive(Serialize)]
struct OutEnvelope<'a, T: Serialize> {
    #[serde(rename = "type")]
    kind: &'a str,
    session_id: Option<&'a str>,
    payload: &'a T,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InEnvelope {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    session_id: Option<String>,
    payload: Value,
}

fn wrap<T: Serialize>(kind: &str, session_id: Option<&str>, payload: &T) -> String {
    serde_json::to_string(&OutEnvelope {
        kind,
        session_id,
        payload,
    })
    .expect("message serializes")
}

/// Serializes a message as one text frame. Keys appear in declaration order.
pub fn encode(session_id: Option<&str>, msg: &Message) -> String {
    let kind = msg.kind();
    match msg {
        Message::StartSession(p) => wrap(kind, session_id, p),
        Message::InputFrame(p) => wrap(kind, session_id, p),
        Message::Snapshot(p) => wrap(kind, session_id, p),
        Message::Event(p) => wrap(kind, session_id, p),
        Message::Report(p) => wrap(kind, session_id, p),
        Message::Error(p) => wrap(kind, session_id, p),
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("not a message envelope: {0}")]
    Envelope(String),
    #[error("unknown message type `{0}`")]
    UnknownType(String),
    #[error("bad `{kind}` payload: {message}")]
    Payload { kind: String, message: String },
}

/// Parses one text frame into its session id and message.
pub fn decode(text: &str) -> Result<(Option<String>, Message), DecodeError> {
    let env: InEnvelope = serde_json::from_str(text).map_err(|e| DecodeError::Envelope(e.to_string()))?;
    fn payload<T: serde::de::DeserializeOwned>(kind: &str, v: Value) -> Result<T, DecodeError> {
        serde_json::from_value(v).map_err(|e| DecodeError::Payload {
            kind: kind.to_owned(),
            message: e.to_string(),
        })
    }
    let k = env.kind.as_str();
    let msg = match k {
        "start_session" => Message::StartSession(payload(k, env.payload)?),
        "input_frame" => Message::InputFrame(payload(k, env.payload)?),
        "snapshot" => Message::Snapshot(Box::new(payload(k, env.payload)?)),
        "event" => Message::Event(payload(k, env.payload)?),
        "report" => Message::Report(payload(k, env.payload)?),
        "error" => Message::Error(payload(k, env.payload)?),
        other => return Err(DecodeError::UnknownType(other.to_owned())),
    };
    Ok((env.session_id, msg))
}
