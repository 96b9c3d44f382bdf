//! One fixed step of the simulation: pedals, teleoperation, IK, smoothing,
//! forward kinematics, scenario events and scoring, in that order.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::config::EngineConfig;
use super::input::InputFrame;
use crate::footboard::{detect_pedals, minimap, MinimapModel, PedalId, PedalState, Side};
use crate::kinematics::{
    forward_kinematics, smooth_joint_step, solve_ik, IkStatus, JointVector, Pose, JOINT_COUNT,
};
use crate::scenario::{
    sort_events, ArmSample, EventKind, RuntimeParams, ScenarioDefinition, ScenarioRun, SessionEvent,
    StepInput,
};
use crate::scoring::{accumulate, preview, EfficiencyState, ScorePreview};
use crate::teleop::{step_teleop, toggle_thirty_degree, ArmTeleopState, CameraState, TeleopMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    pub theta: JointVector,
    /// `None` until the first frame anchors the arm.
    pub teleop: Option<ArmTeleopState>,
    pub ik_status: Option<IkStatus>,
    pub ik_iterations: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    /// Ticks already processed.
    pub tick: u64,
    pub arms: [ArmState; 2],
    pub camera: CameraState,
    pub pedals: PedalState,
    pub scenario: ScenarioRun,
    pub efficiency: EfficiencyState,
    /// Every event emitted so far, in order.
    pub events: Vec<SessionEvent>,
    pub halted: bool,
    /// Snapshot-only view of the last frame's feet.
    pub minimap: MinimapModel,
}

impl SessionState {
    pub fn new(cfg: &EngineConfig, def: ScenarioDefinition) -> Self {
        let arm = |side| ArmState {
            theta: cfg.arms.chain(side).home(),
            teleop: None,
            ik_status: None,
            ik_iterations: 0,
        };
        let params = RuntimeParams {
            force_stiffness: cfg.scoring.force_stiffness,
            grip_close_threshold: cfg.teleop.grip_close_threshold,
            view_half_angle: cfg.camera.view_half_angle,
        };
        let pedals = PedalState::default();
        let minimap = minimap(&[], &cfg.pedals, &pedals, cfg.minimap_gain);
        Self {
            tick: 0,
            arms: [arm(Side::Left), arm(Side::Right)],
            camera: CameraState::new(cfg.camera.initial_pose()),
            pedals,
            scenario: ScenarioRun::new(def, params),
            efficiency: EfficiencyState::default(),
            events: Vec::new(),
            halted: false,
            minimap,
        }
    }

    pub fn snapshot(&self, cfg: &EngineConfig) -> StateSnapshot {
        let def = self.scenario.definition();
        let arms = Side::BOTH.map(|side| {
            let arm = &self.arms[side.index()];
            let chain = cfg.arms.chain(side);
            let frames = chain.link_frames(&arm.theta);
            let ee_pose = frames[JOINT_COUNT];
            let (ee_target, grip, mode) = match &arm.teleop {
                Some(t) => (t.ee_target, t.grip_command, t.mode),
                None => (ee_pose, 0.0, TeleopMode::Following),
            };
            ArmSnapshot {
                side,
                theta: arm.theta.into(),
                joint_positions: frames.iter().map(|f| f.translation.into()).collect(),
                ee_pose,
                ee_target,
                grip,
                mode,
                ik_status: arm.ik_status,
                ik_iterations: arm.ik_iterations,
            }
        });
        let objects = self
            .scenario
            .objects
            .iter()
            .map(|o| ObjectSnapshot {
                id: o.id.clone(),
                position: o.position,
                held_by: o.held_by,
            })
            .collect();
        StateSnapshot {
            tick: self.tick,
            time: self.efficiency.elapsed,
            arms,
            camera: self.camera,
            pedals: self.pedals.pressed_ids(),
            minimap: self.minimap.clone(),
            objects,
            progress: Progress {
                action_index: self.scenario.action_index,
                repetition: self.scenario.repetition,
                completed: self.scenario.completed_repetitions(),
                total: def.total_repetitions(),
                target: self.scenario.current_target_center(),
            },
            score: preview(&self.efficiency, &self.events, &def.thresholds, &def.weights),
            halted: self.halted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSnapshot {
    pub side: Side,
    pub theta: [f64; JOINT_COUNT],
    /// Origins of the six joint frames and the tool tip, base to tip.
    pub joint_positions: Vec<[f64; 3]>,
    pub ee_pose: Pose,
    pub ee_target: Pose,
    pub grip: f64,
    pub mode: TeleopMode,
    pub ik_status: Option<IkStatus>,
    pub ik_iterations: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSnapshot {
    pub id: String,
    pub position: Vector3<f64>,
    pub held_by: Option<Side>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub action_index: usize,
    pub repetition: u32,
    pub completed: u32,
    pub total: u32,
    /// Where the current repetition's target sits.
    pub target: Option<Vector3<f64>>,
}

/// Everything a viewer needs to draw one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub tick: u64,
    /// Simulated seconds.
    pub time: f64,
    pub arms: [ArmSnapshot; 2],
    pub camera: CameraState,
    pub pedals: Vec<PedalId>,
    pub minimap: MinimapModel,
    pub objects: Vec<ObjectSnapshot>,
    pub progress: Progress,
    pub score: ScorePreview,
    pub halted: bool,
}

/// Advances `state` by one tick in place and returns this tick's events.
/// A halted session is left untouched.
pub fn advance(state: &mut SessionState, frame: &InputFrame, cfg: &EngineConfig) -> Vec<SessionEvent> {
    if state.halted {
        return Vec::new();
    }
    let tick = state.tick;
    let dt = cfg.tick;
    let mut events = Vec::new();

    let pedals = detect_pedals(&frame.feet, &cfg.pedals, &state.pedals);
    state.minimap = minimap(&frame.feet, &cfg.pedals, &pedals, cfg.minimap_gain);
    let mut camera = toggle_thirty_degree(&state.camera, pedals.pressed_edge(PedalId::ThirtyDegree));

    let mut samples = [ArmSample {
        tip: Pose::identity(),
        target: Pose::identity(),
        grip: 0.0,
    }; 2];
    let mut frames = Vec::with_capacity(2 * (JOINT_COUNT + 1));

    for side in Side::BOTH {
        let chain = cfg.arms.chain(side);
        let arm = &mut state.arms[side.index()];
        let master = frame.master(side);
        let teleop = match arm.teleop {
            Some(t) => t,
            None => ArmTeleopState::new(master.pose(), forward_kinematics(chain, &arm.theta)),
        };
        // Lost tracking behaves like a held clutch on that arm.
        let (master_pose, arm_pedals) = if master.valid {
            (master.pose(), pedals.clone())
        } else {
            (teleop.last_master, pedals.with_forced(PedalId::Clutch))
        };
        let (teleop, cam) = step_teleop(
            &teleop,
            &camera,
            &master_pose,
            master.grip,
            &arm_pedals,
            &cfg.teleop,
        );
        camera = cam;
        arm.teleop = Some(teleop);

        let ik = solve_ik(chain, &teleop.ee_target, &arm.theta, &cfg.ik);
        arm.ik_status = Some(ik.status);
        arm.ik_iterations = ik.iterations;
        if ik.status == IkStatus::Diverged {
            events.push(SessionEvent::new(tick, EventKind::IkDiverged, None, Some(side)));
        } else {
            arm.theta = smooth_joint_step(&arm.theta, &ik.theta, dt, cfg.smoothing_rate);
        }

        let links = chain.link_frames(&arm.theta);
        samples[side.index()] = ArmSample {
            tip: links[JOINT_COUNT],
            target: teleop.ee_target,
            grip: teleop.grip_command,
        };
        frames.extend_from_slice(&links);
    }

    events.extend(state.scenario.step(
        &StepInput {
            arms: samples,
            camera,
        },
        dt,
    ));
    sort_events(&mut events);

    state.efficiency = accumulate(&state.efficiency, &frames, dt, cfg.scoring.beta);
    state.camera = camera;
    state.pedals = pedals;
    state.tick += 1;
    state.halted = state.scenario.is_halted();
    state.events.extend(events.iter().cloned());
    events
}

/// Pure form of [`advance`]: returns the next state, the tick's events and
/// the resulting snapshot.
pub fn tick(
    state: &SessionState,
    frame: &InputFrame,
    cfg: &EngineConfig,
) -> (SessionState, Vec<SessionEvent>, StateSnapshot) {
    let mut next = state.clone();
    let events = advance(&mut next, frame, cfg);
    let snapshot = next.snapshot(cfg);
    (next, events, snapshot)
}
