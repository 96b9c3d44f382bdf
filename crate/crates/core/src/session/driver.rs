//! Resamples timestamped input frames onto the fixed tick grid and runs the
//! engine over them. Replay and the live service both go through
//! [`SessionDriver`], which is what makes a recorded live session replay to
//! the same report.

use thiserror::Error;

use super::config::EngineConfig;
use super::engine::{advance, SessionState, StateSnapshot};
use super::input::{parse_log, InputFrame, LogError};
use crate::scenario::{ScenarioDefinition, SessionEvent};
use crate::scoring::{finalize, FailureReason, Report, ReportMetadata, ScoreBreakdown};

#[derive(Debug, Error, PartialEq)]
pub enum PushError {
    #[error("frame at {t} ms is not after the previous frame at {previous} ms")]
    OutOfOrder { t: u64, previous: u64 },
    #[error("invalid frame: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub events: Vec<SessionEvent>,
    pub snapshot: StateSnapshot,
}

#[derive(Debug, Clone)]
pub struct SessionDriver {
    cfg: EngineConfig,
    state: SessionState,
    /// Timestamp of the first frame; tick `k` samples at `start + k · tick_ms`.
    start: Option<u64>,
    held: Option<InputFrame>,
}

impl SessionDriver {
    pub fn new(cfg: EngineConfig, def: ScenarioDefinition) -> Self {
        let state = SessionState::new(&cfg, def);
        Self {
            cfg,
            state,
            start: None,
            held: None,
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn is_halted(&self) -> bool {
        self.state.halted
    }

    pub fn snapshot(&self) -> StateSnapshot {
        self.state.snapshot(&self.cfg)
    }

    fn next_tick_time(&self) -> Option<u64> {
        self.start.map(|s| s + self.state.tick * self.cfg.tick_ms())
    }

    /// Feeds one frame and runs every tick whose sample time is at or before
    /// `frame.t`. Ticks falling between frames reuse the previous frame.
    pub fn push(&mut self, frame: InputFrame) -> Result<Vec<TickOutput>, PushError> {
        frame.validate().map_err(|e| PushError::Invalid(e.to_string()))?;
        if let Some(prev) = &self.held {
            if frame.t <= prev.t {
                return Err(PushError::OutOfOrder {
                    t: frame.t,
                    previous: prev.t,
                });
            }
        }
        if self.start.is_none() {
            self.start = Some(frame.t);
        }
        let mut out = Vec::new();
        if let Some(prev) = self.held {
            self.run_until(&prev, |t| t < frame.t, &mut out);
        }
        self.held = Some(frame);
        self.run_until(&frame, |t| t <= frame.t, &mut out);
        Ok(out)
    }

    fn run_until(&mut self, frame: &InputFrame, keep_going: impl Fn(u64) -> bool, out: &mut Vec<TickOutput>) {
        while !self.state.halted {
            let Some(t) = self.next_tick_time() else { break };
            if !keep_going(t) {
                break;
            }
            let events = advance(&mut self.state, frame, &self.cfg);
            out.push(TickOutput {
                events,
                snapshot: self.state.snapshot(&self.cfg),
            });
        }
    }

    pub fn breakdown(&self) -> ScoreBreakdown {
        let def = self.state.scenario.definition();
        finalize(
            &self.state.efficiency,
            &self.state.events,
            &def.thresholds,
            &def.weights,
        )
    }

    pub fn metadata(&self) -> ReportMetadata {
        let start = self.start.unwrap_or(0);
        let ticks = self.state.tick;
        ReportMetadata {
            scenario_id: self.state.scenario.definition().id.clone(),
            started_at_ms: start,
            ended_at_ms: start + ticks.saturating_sub(1) * self.cfg.tick_ms(),
            ticks,
        }
    }

    /// Final report. A session that has not halted yet counts as incomplete.
    pub fn report(&self) -> Report {
        Report::new(&self.breakdown(), &self.metadata())
    }

    /// Report for a live session whose client went away.
    pub fn disconnected_report(&self) -> Report {
        let mut b = self.breakdown();
        if !self.state.halted {
            b.fail(FailureReason::Disconnected);
        }
        Report::new(&b, &self.metadata())
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("input log line {line}: {source}")]
    Frame { line: usize, source: PushError },
}

/// Result of replaying a log, with the full event stream kept for
/// inspection.
#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub report: Report,
    pub events: Vec<SessionEvent>,
    pub ticks: u64,
}

pub fn replay_frames(
    cfg: &EngineConfig,
    def: &ScenarioDefinition,
    frames: &[InputFrame],
    mut on_tick: impl FnMut(&TickOutput),
) -> Result<ReplayOutcome, ReplayError> {
    let mut driver = SessionDriver::new(cfg.clone(), def.clone());
    for (i, f) in frames.iter().enumerate() {
        if driver.is_halted() {
            break;
        }
        let outs = driver
            .push(*f)
            .map_err(|source| ReplayError::Frame { line: i + 2, source })?;
        outs.iter().for_each(&mut on_tick);
    }
    Ok(ReplayOutcome {
        report: driver.report(),
        events: driver.state().events.clone(),
        ticks: driver.state().tick,
    })
}

/// Replays a JSONL input log against a scenario and returns the report.
pub fn run_replay(
    def: &ScenarioDefinition,
    log: &str,
    cfg: &EngineConfig,
) -> Result<ReplayOutcome, ReplayError> {
    let frames = parse_log(log)?;
    replay_frames(cfg, def, &frames, |_| {})
}
