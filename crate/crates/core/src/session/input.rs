//! Input frames and the JSONL input log.
//!
//! A log is a header line `{"format":"teletwin-input","version":1}` followed
//! by one [`InputFrame`] per line with strictly increasing `t`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::footboard::{FootSample, Side};
use crate::kinematics::{quaternion_to_rotation, Pose};

pub const LOG_FORMAT: &str = "teletwin-input";
pub const LOG_VERSION: u32 = 1;
pub const QUATERNION_TOLERANCE: f64 = 1e-6;

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MasterSample {
    /// Meters.
    pub position: [f64; 3],
    /// Unit quaternion, w first.
    pub orientation: [f64; 4],
    /// 0 = open, 1 = closed.
    pub grip: f64,
    #[serde(default = "yes")]
    pub valid: bool,
}

impl MasterSample {
    pub fn new(pose: &Pose, grip: f64) -> Self {
        Self {
            position: pose.translation.into(),
            orientation: crate::kinematics::rotation_to_quaternion(&pose.rotation),
            grip,
            valid: true,
        }
    }

    pub fn pose(&self) -> Pose {
        Pose::new(
            quaternion_to_rotation(self.orientation),
            Vector3::from(self.position),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputFrame {
    /// Milliseconds since session start.
    pub t: u64,
    pub left: MasterSample,
    pub right: MasterSample,
    pub feet: [FootSample; 2],
}

#[derive(Debug, Error, PartialEq)]
pub enum FrameError {
    #[error("{0} master orientation is not a unit quaternion")]
    Quaternion(&'static str),
    #[error("{0} master has a non-finite value")]
    NonFinite(&'static str),
    #[error("{0} grip must lie in [0, 1]")]
    Grip(&'static str),
    #[error("foot {0} has the wrong side tag")]
    FootSide(usize),
}

impl InputFrame {
    pub fn master(&self, side: Side) -> &MasterSample {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn validate(&self) -> Result<(), FrameError> {
        for (name, m) in [("left", &self.left), ("right", &self.right)] {
            if !m.position.iter().chain(&m.orientation).all(|v| v.is_finite()) || !m.grip.is_finite() {
                return Err(FrameError::NonFinite(name));
            }
            let n = m.orientation.iter().map(|c| c * c).sum::<f64>().sqrt();
            if (n - 1.0).abs() > QUATERNION_TOLERANCE {
                return Err(FrameError::Quaternion(name));
            }
            if !(0.0..=1.0).contains(&m.grip) {
                return Err(FrameError::Grip(name));
            }
        }
        for (i, side) in Side::BOTH.into_iter().enumerate() {
            if self.feet[i].side != side {
                return Err(FrameError::FootSide(i));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogHeader {
    format: String,
    version: u32,
}

#[derive(Debug, Error, PartialEq)]
#[error("input log line {line}: {message}")]
pub struct LogError {
    /// 1-based.
    pub line: usize,
    pub message: String,
}

fn log_err(line: usize, message: impl ToString) -> LogError {
    LogError {
        line,
        message: message.to_string(),
    }
}

/// Parses a whole log. Blank lines are skipped; everything else must be a
/// valid frame.
pub fn parse_log(text: &str) -> Result<Vec<InputFrame>, LogError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let Some((n, first)) = lines.next() else {
        return Err(log_err(1, "missing header line"));
    };
    let header: LogHeader =
        serde_json::from_str(first).map_err(|e| log_err(n, format!("bad header: {e}")))?;
    if header.format != LOG_FORMAT {
        return Err(log_err(n, format!("unknown format `{}`", header.format)));
    }
    if header.version != LOG_VERSION {
        return Err(log_err(n, format!("unsupported version {}", header.version)));
    }
    let mut frames: Vec<InputFrame> = Vec::new();
    for (n, line) in lines {
        let frame: InputFrame = serde_json::from_str(line).map_err(|e| log_err(n, e))?;
        frame.validate().map_err(|e| log_err(n, e))?;
        if let Some(prev) = frames.last() {
            if frame.t <= prev.t {
                return Err(log_err(
                    n,
                    format!("timestamp {} does not follow {}", frame.t, prev.t),
                ));
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

pub fn log_header() -> String {
    serde_json::to_string(&LogHeader {
        format: LOG_FORMAT.to_owned(),
        version: LOG_VERSION,
    })
    .expect("header serializes")
}

pub fn frame_line(frame: &InputFrame) -> String {
    serde_json::to_string(frame).expect("frame serializes")
}

pub fn write_log(frames: &[InputFrame]) -> String {
    let mut out = log_header();
    out.push('\n');
    for f in frames {
        out.push_str(&frame_line(f));
        out.push('\n');
    }
    out
}
