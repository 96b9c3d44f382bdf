//! Efficiency metrics, penalties and the final score breakdown.
//!
//! Each efficiency metric starts at 50 points and loses points linearly once
//! its budget is exceeded. Penalties deduct `weight × count`. Any
//! immediate-fail event fails the session with a total of zero.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

use crate::kinematics::{rotation_angle, Pose};
use crate::scenario::{EventKind, SessionEvent, Thresholds};

/// Starting score of each efficiency metric.
pub const EFFICIENCY_MAX: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    Drop,
    ExcessiveForce,
    GlassBreak,
    OutOfView,
}

impl PenaltyKind {
    pub const ALL: [PenaltyKind; 4] = [
        PenaltyKind::Drop,
        PenaltyKind::ExcessiveForce,
        PenaltyKind::GlassBreak,
        PenaltyKind::OutOfView,
    ];

    pub fn from_event(kind: EventKind) -> Option<PenaltyKind> {
        match kind {
            EventKind::Drop => Some(PenaltyKind::Drop),
            EventKind::ExcessiveForce => Some(PenaltyKind::ExcessiveForce),
            EventKind::GlassBreak => Some(PenaltyKind::GlassBreak),
            EventKind::OutOfView => Some(PenaltyKind::OutOfView),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyWeights {
    pub drop: f64,
    pub excessive_force: f64,
    pub glass_break: f64,
    pub out_of_view: f64,
    pub immediate_fail: BTreeSet<EventKind>,
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        Self {
            drop: 10.0,
            excessive_force: 5.0,
            glass_break: 15.0,
            out_of_view: 2.0,
            immediate_fail: BTreeSet::from([EventKind::TowerDetach]),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WeightsError {
    #[error("penalty weight `{0}` must be non-negative")]
    Negative(&'static str),
    #[error("drop weight must exceed the excessive-force weight")]
    Ordering,
}

impl PenaltyWeights {
    pub fn weight(&self, kind: PenaltyKind) -> f64 {
        match kind {
            PenaltyKind::Drop => self.drop,
            PenaltyKind::ExcessiveForce => self.excessive_force,
            PenaltyKind::GlassBreak => self.glass_break,
            PenaltyKind::OutOfView => self.out_of_view,
        }
    }

    pub fn validate(&self) -> Result<(), WeightsError> {
        for (name, w) in [
            ("drop", self.drop),
            ("excessive_force", self.excessive_force),
            ("glass_break", self.glass_break),
            ("out_of_view", self.out_of_view),
        ] {
            if !(w >= 0.0) {
                return Err(WeightsError::Negative(name));
            }
        }
        if !(self.drop > self.excessive_force) {
            return Err(WeightsError::Ordering);
        }
        Ok(())
    }
}

/// Running efficiency measurements for one session.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EfficiencyState {
    /// Seconds.
    pub elapsed: f64,
    /// Meters-equivalent: translation plus β-weighted rotation of every
    /// tracked frame.
    pub motion_accum: f64,
    /// Frames from the previous tick.
    #[serde(default)]
    pub last_frames: Vec<Pose>,
}

pub fn accumulate(state: &EfficiencyState, frames: &[Pose], dt: f64, beta: f64) -> EfficiencyState {
    assert!(dt > 0.0, "dt must be positive");
    let mut motion = state.motion_accum;
    if state.last_frames.len() == frames.len() {
        for (prev, now) in state.last_frames.iter().zip(frames) {
            let dp = (now.translation - prev.translation).norm();
            let da = rotation_angle(&(prev.rotation.transpose() * now.rotation));
            motion += dp + beta * da;
        }
    }
    EfficiencyState {
        elapsed: state.elapsed + dt,
        motion_accum: motion,
        last_frames: frames.to_vec(),
    }
}

/// 50 points within budget, then linear loss at `slope` per unit over it,
/// floored at zero.
pub fn efficiency_points(value: f64, budget: f64, slope: f64) -> f64 {
    if value <= budget {
        EFFICIENCY_MAX
    } else {
        (EFFICIENCY_MAX - slope * (value - budget)).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "event")]
pub enum FailureReason {
    /// An immediate-fail event occurred.
    ImmediateFail(EventKind),
    /// The session ended before every action was completed.
    Incomplete,
    /// The live client went away mid-session.
    Disconnected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub value: f64,
    pub budget: f64,
    pub points: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyScores {
    pub total_time: MetricScore,
    pub economy_of_motion: MetricScore,
}

impl EfficiencyScores {
    pub fn sum(&self) -> f64 {
        self.total_time.points + self.economy_of_motion.points
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyLine {
    pub kind: PenaltyKind,
    pub count: u32,
    pub weight: f64,
    pub deducted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub efficiency: EfficiencyScores,
    pub penalties: Vec<PenaltyLine>,
    pub status: ScoreStatus,
    pub failure_reason: Option<FailureReason>,
    pub total: f64,
}

impl ScoreBreakdown {
    pub fn deductions(&self) -> f64 {
        self.penalties.iter().map(|p| p.deducted).sum()
    }

    /// Marks the session failed for `reason`; the total becomes zero.
    pub fn fail(&mut self, reason: FailureReason) {
        self.status = ScoreStatus::Failed;
        self.failure_reason = Some(reason);
        self.total = 0.0;
    }
}

fn efficiency_scores(eff: &EfficiencyState, thresholds: &Thresholds) -> EfficiencyScores {
    EfficiencyScores {
        total_time: MetricScore {
            value: eff.elapsed,
            budget: thresholds.time_budget,
            points: efficiency_points(eff.elapsed, thresholds.time_budget, thresholds.time_slope),
        },
        economy_of_motion: MetricScore {
            value: eff.motion_accum,
            budget: thresholds.motion_budget,
            points: efficiency_points(
                eff.motion_accum,
                thresholds.motion_budget,
                thresholds.motion_slope,
            ),
        },
    }
}

fn penalty_lines(events: &[SessionEvent], weights: &PenaltyWeights) -> Vec<PenaltyLine> {
    let mut counts = [0u32; 4];
    for e in events {
        if let Some(k) = PenaltyKind::from_event(e.kind) {
            counts[k as usize] += 1;
        }
    }
    PenaltyKind::ALL
        .into_iter()
        .zip(counts)
        .filter(|(_, n)| *n > 0)
        .map(|(kind, count)| {
            let weight = weights.weight(kind);
            PenaltyLine {
                kind,
                count,
                weight,
                deducted: weight * count as f64,
            }
        })
        .collect()
}

/// Final score of a halted session.
///
/// Status is `Failed` when an immediate-fail event is present or when the
/// scenario never completed.
pub fn finalize(
    eff: &EfficiencyState,
    events: &[SessionEvent],
    thresholds: &Thresholds,
    weights: &PenaltyWeights,
) -> ScoreBreakdown {
    let efficiency = efficiency_scores(eff, thresholds);
    let penalties = penalty_lines(events, weights);
    let mut breakdown = ScoreBreakdown {
        efficiency,
        penalties,
        status: ScoreStatus::Completed,
        failure_reason: None,
        total: 0.0,
    };
    if let Some(e) = events.iter().find(|e| weights.immediate_fail.contains(&e.kind)) {
        breakdown.fail(FailureReason::ImmediateFail(e.kind));
    } else if !events.iter().any(|e| e.kind == EventKind::ScenarioComplete) {
        breakdown.fail(FailureReason::Incomplete);
    } else {
        breakdown.total = (efficiency.sum() - breakdown.deductions()).max(0.0);
    }
    breakdown
}

/// Running score shown while a session is live.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorePreview {
    pub total_time: f64,
    pub economy_of_motion: f64,
    pub deductions: f64,
    pub total: f64,
    pub failed: bool,
}

pub fn preview(
    eff: &EfficiencyState,
    events: &[SessionEvent],
    thresholds: &Thresholds,
    weights: &PenaltyWeights,
) -> ScorePreview {
    let efficiency = efficiency_scores(eff, thresholds);
    let deductions: f64 = penalty_lines(events, weights).iter().map(|p| p.deducted).sum();
    let failed = events.iter().any(|e| weights.immediate_fail.contains(&e.kind));
    ScorePreview {
        total_time: efficiency.total_time.points,
        economy_of_motion: efficiency.economy_of_motion.points,
        deductions,
        total: if failed {
            0.0
        } else {
            (efficiency.sum() - deductions).max(0.0)
        },
        failed,
    }
}

/// Identification and timing attached to an exported report. Times are
/// simulated, never wall-clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub scenario_id: String,
    pub started_at_ms: u64,
    pub ended_at_ms: u64,
    pub ticks: u64,
}

pub const REPORT_FORMAT: &str = "teletwin-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub format: String,
    pub version: u32,
    pub scenario_id: String,
    pub started_at_ms: u64,
    pub ended_at_ms: u64,
    pub ticks: u64,
    pub status: ScoreStatus,
    pub failure_reason: Option<FailureReason>,
    pub efficiency: EfficiencyScores,
    pub penalties: Vec<PenaltyLine>,
    pub total: f64,
}

/// Rounds to six decimals so the document does not depend on last-bit noise.
fn canonical(x: f64) -> f64 {
    let r = (x * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn canonical_metric(m: &MetricScore) -> MetricScore {
    MetricScore {
        value: canonical(m.value),
        budget: canonical(m.budget),
        points: canonical(m.points),
    }
}

impl Report {
    pub fn new(breakdown: &ScoreBreakdown, meta: &ReportMetadata) -> Self {
        Self {
            format: REPORT_FORMAT.to_owned(),
            version: REPORT_VERSION,
            scenario_id: meta.scenario_id.clone(),
            started_at_ms: meta.started_at_ms,
            ended_at_ms: meta.ended_at_ms,
            ticks: meta.ticks,
            status: breakdown.status,
            failure_reason: breakdown.failure_reason.clone(),
            efficiency: EfficiencyScores {
                total_time: canonical_metric(&breakdown.efficiency.total_time),
                economy_of_motion: canonical_metric(&breakdown.efficiency.economy_of_motion),
            },
            penalties: breakdown
                .penalties
                .iter()
                .map(|p| PenaltyLine {
                    kind: p.kind,
                    count: p.count,
                    weight: canonical(p.weight),
                    deducted: canonical(p.deducted),
                })
                .collect(),
            total: canonical(breakdown.total),
        }
    }

    /// Canonical text: fixed key order, two-space indentation, trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn export_report(breakdown: &ScoreBreakdown, meta: &ReportMetadata) -> String {
    Report::new(breakdown, meta).to_canonical_json()
}
