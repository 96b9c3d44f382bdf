//! Scripted operator: produces input frames that steer the tool tips along
//! chosen paths, press pedals and work the grips. Used to author fixture
//! logs and synthetic training runs.

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::footboard::{FootSample, PedalId, Side};
use crate::kinematics::{forward_kinematics, rotation_exp, rotation_log, Pose};
use crate::scenario::{bundled_scenario, ScenarioDefinition, Shape};
use crate::session::{EngineConfig, InputFrame, MasterSample};

/// Master positions are quantized to this resolution, meters.
const TRACKER_RESOLUTION: f64 = 1e-6;
const FOOT_REST_HEIGHT: f64 = 0.08;

fn quantize(v: f64) -> f64 {
    let q = libm::round(v / TRACKER_RESOLUTION) * TRACKER_RESOLUTION;
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedOperator {
    cfg: EngineConfig,
    frame_ms: u64,
    t: u64,
    masters: [Pose; 2],
    grips: [f64; 2],
    feet: [FootSample; 2],
    /// Commanded tip positions, kept in step with the masters.
    tips: [Vector3<f64>; 2],
    frames: Vec<InputFrame>,
}

impl ScriptedOperator {
    pub fn new(cfg: &EngineConfig, frame_ms: u64) -> Self {
        assert!(frame_ms > 0, "frame period must be positive");
        let tip = |side| forward_kinematics(cfg.arms.chain(side), &cfg.arms.chain(side).home()).translation;
        Self {
            cfg: cfg.clone(),
            frame_ms,
            t: 0,
            masters: [
                Pose::from_translation(Vector3::new(0.0, 0.2, 1.0)),
                Pose::from_translation(Vector3::new(0.0, -0.2, 1.0)),
            ],
            grips: [0.0; 2],
            feet: Self::rest_feet(),
            tips: [tip(Side::Left), tip(Side::Right)],
            frames: Vec::new(),
        }
    }

    fn rest_feet() -> [FootSample; 2] {
        [
            FootSample::at(Side::Left, 0.2, 0.2, FOOT_REST_HEIGHT),
            FootSample::at(Side::Right, 0.4, 0.2, FOOT_REST_HEIGHT),
        ]
    }

    fn seconds_to_frames(&self, seconds: f64) -> u64 {
        (libm::ceil(seconds * 1000.0 / self.frame_ms as f64) as u64).max(1)
    }

    pub fn tip(&self, side: Side) -> Vector3<f64> {
        self.tips[side.index()]
    }

    pub fn time_ms(&self) -> u64 {
        self.t
    }

    fn emit(&mut self) {
        let sample = |pose: &Pose, grip: f64| {
            let mut m = MasterSample::new(pose, grip);
            m.position = m.position.map(quantize);
            m
        };
        self.frames.push(InputFrame {
            t: self.t,
            left: sample(&self.masters[0], self.grips[0]),
            right: sample(&self.masters[1], self.grips[1]),
            feet: self.feet,
        });
        self.t += self.frame_ms;
    }

    pub fn hold(&mut self, seconds: f64) -> &mut Self {
        for _ in 0..self.seconds_to_frames(seconds) {
            self.emit();
        }
        self
    }

    /// Moves the tip in a straight line at `speed` m/s by moving the master
    /// `1/α` times as far. Assumes no pedal is held.
    pub fn move_tip(&mut self, side: Side, target: Vector3<f64>, speed: f64) -> &mut Self {
        let i = side.index();
        let start_tip = self.tips[i];
        let start_master = self.masters[i].translation;
        let d = target - start_tip;
        let n = self.seconds_to_frames(d.norm() / speed);
        for k in 1..=n {
            let s = k as f64 / n as f64;
            self.tips[i] = start_tip + d * s;
            self.masters[i].translation = start_master + d * (s / self.cfg.teleop.motion_scale);
            self.emit();
        }
        self
    }

    /// Visits each point in turn.
    pub fn path(&mut self, side: Side, points: &[Vector3<f64>], speed: f64) -> &mut Self {
        for p in points {
            self.move_tip(side, *p, speed);
        }
        self
    }

    /// Moves only the master hand, e.g. while clutched.
    pub fn move_master(&mut self, side: Side, delta: Vector3<f64>, seconds: f64) -> &mut Self {
        let i = side.index();
        let start = self.masters[i].translation;
        let n = self.seconds_to_frames(seconds);
        for k in 1..=n {
            self.masters[i].translation = start + delta * (k as f64 / n as f64);
            self.emit();
        }
        self
    }

    /// Snaps the master by `delta` within a single frame.
    pub fn jerk_master(&mut self, side: Side, delta: Vector3<f64>) -> &mut Self {
        self.masters[side.index()].translation += delta;
        self.tips[side.index()] += delta * self.cfg.teleop.motion_scale;
        self.emit();
        self
    }

    /// Rotates the master about a world axis through its own position.
    pub fn rotate_master(&mut self, side: Side, rotation: &Matrix3<f64>, seconds: f64) -> &mut Self {
        let i = side.index();
        let omega = rotation_log(rotation);
        let n = self.seconds_to_frames(seconds);
        let step = rotation_exp(&(omega / n as f64));
        for _ in 0..n {
            self.masters[i].rotation = step * self.masters[i].rotation;
            self.emit();
        }
        self
    }

    pub fn grip(&mut self, side: Side, value: f64) -> &mut Self {
        self.grips[side.index()] = value;
        self.emit();
        self
    }

    /// Puts `foot` down on the center of `pedal`.
    pub fn press(&mut self, foot: Side, pedal: PedalId) -> &mut Self {
        let center = self
            .cfg
            .pedals
            .region(pedal)
            .map(|r| r.rect.center())
            .unwrap_or(Vector2::zeros());
        self.feet[foot.index()] = FootSample::at(foot, center.x, center.y, 0.0);
        self.emit();
        self
    }

    pub fn lift(&mut self, foot: Side) -> &mut Self {
        self.feet[foot.index()] = Self::rest_feet()[foot.index()];
        self.emit();
        self
    }

    pub fn frames(&self) -> &[InputFrame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<InputFrame> {
        self.frames
    }
}

/// Default tip speed for scripted motion, m/s.
pub const TIP_SPEED: f64 = 0.05;
/// Frame period of the authored fixture logs, milliseconds.
pub const FIXTURE_FRAME_MS: u64 = 20;

fn sphere_center(def: &ScenarioDefinition, id: &str) -> Vector3<f64> {
    match def.object(id).map(|o| o.shape) {
        Some(Shape::Sphere { center, .. }) => center,
        other => panic!("object {id} is not a sphere: {other:?}"),
    }
}

/// Imperfections added to a wrist-articulation run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WristRunStyle {
    /// Extra vertical excursion after every touch, meters.
    pub detour: f64,
    /// Times the tip is pushed into the glass wall.
    pub glass_hits: u32,
}

/// A run of `wrist_articulation_1` with the left arm.
pub fn wrist_articulation_run(cfg: &EngineConfig, style: WristRunStyle) -> Vec<InputFrame> {
    let def = bundled_scenario("wrist_articulation_1").expect("bundled");
    let action = &def.actions[0];
    let ball = sphere_center(&def, &action.targets[0]);
    let Some(Shape::Shell {
        center,
        half_extents,
        thickness,
        ..
    }) = def.object("glass_cube").map(|o| o.shape)
    else {
        panic!("glass_cube is not a shell");
    };
    let side = Side::Left;
    let mut op = ScriptedOperator::new(cfg, FIXTURE_FRAME_MS);
    op.hold(0.2);
    let entry = Vector3::new(center.x, center.y, center.z + half_extents.z + 0.03);
    op.move_tip(side, entry, TIP_SPEED);
    let mut hits = style.glass_hits;
    for rep in 0..action.repetitions {
        let c = action.placed_center(ball, rep);
        op.move_tip(side, c, TIP_SPEED);
        if hits > 0 {
            hits -= 1;
            let wall = Vector3::new(center.x + half_extents.x - thickness * 0.5, c.y, c.z);
            op.path(side, &[wall, c], TIP_SPEED);
        }
        if style.detour > 0.0 && rep + 1 < action.repetitions {
            let up = c + Vector3::new(0.0, 0.0, style.detour);
            op.path(side, &[up, c + Vector3::new(0.0, 0.0, 0.015)], TIP_SPEED);
        }
    }
    op.hold(0.5);
    op.into_frames()
}

fn clutch_run(cfg: &EngineConfig) -> Vec<InputFrame> {
    let def = bundled_scenario("clutch").expect("bundled");
    let action = &def.actions[0];
    let side = Side::Left;
    let mut op = ScriptedOperator::new(cfg, FIXTURE_FRAME_MS);
    op.hold(0.2);
    let home_master = op.masters[side.index()].translation;
    for rep in 0..action.repetitions {
        let c = sphere_center(&def, action.target_for(rep));
        op.path(side, &[c + Vector3::new(0.0, 0.0, 0.03), c], TIP_SPEED);
        op.move_tip(side, c + Vector3::new(0.0, 0.0, 0.03), TIP_SPEED);
        // Re-center the hand while clutched.
        op.press(side, PedalId::Clutch);
        let back = home_master - op.masters[side.index()].translation;
        op.move_master(side, back, 0.6);
        op.lift(side);
    }
    op.hold(0.5);
    op.into_frames()
}

fn camera_run(cfg: &EngineConfig) -> Vec<InputFrame> {
    let def = bundled_scenario("camera_0").expect("bundled");
    let action = &def.actions[0];
    let scale = cfg.teleop.camera_rotation_scale;
    let eye = cfg.camera.eye;
    let mut view = (cfg.camera.look_at - eye).normalize();
    let mut op = ScriptedOperator::new(cfg, FIXTURE_FRAME_MS);
    op.hold(0.2);
    for rep in 0..action.repetitions {
        let target = (sphere_center(&def, action.target_for(rep)) - eye).normalize();
        let axis = view.cross(&target);
        let angle = libm::atan2(axis.norm(), view.dot(&target));
        let turn = rotation_exp(&(axis.normalize() * (angle / scale)));
        op.press(Side::Right, PedalId::Camera);
        op.rotate_master(Side::Left, &turn, 1.0);
        op.hold(0.1);
        op.lift(Side::Right);
        op.hold(0.2);
        view = target;
    }
    op.hold(0.5);
    op.into_frames()
}

fn sea_spikes_run(cfg: &EngineConfig, frame_ms: u64, pause: f64) -> Vec<InputFrame> {
    let def = bundled_scenario("sea_spikes_1").expect("bundled");
    let action = &def.actions[0];
    let mut op = ScriptedOperator::new(cfg, frame_ms);
    op.hold(0.2);
    for rep in 0..action.repetitions {
        let c = sphere_center(&def, action.target_for(rep));
        // Spikes on the left half go to the left arm.
        let side = if c.y >= 0.0 { Side::Left } else { Side::Right };
        let above = c + Vector3::new(0.0, 0.0, 0.03);
        op.path(side, &[above, c, above], TIP_SPEED);
        op.hold(pause);
    }
    op.hold(0.5);
    op.into_frames()
}

fn ring_tower_run(cfg: &EngineConfig, yank: bool) -> Vec<InputFrame> {
    let def = bundled_scenario("ring_tower_transfer_1").expect("bundled");
    let ring = def.object("ring").expect("ring");
    let start = ring.shape.center();
    let drop = ring.placement_target.expect("placement target").center;
    let Some(Shape::Tower { base, height, .. }) = def.object("tower").map(|o| o.shape) else {
        panic!("tower missing");
    };
    let side = Side::Left;
    let mut op = ScriptedOperator::new(cfg, FIXTURE_FRAME_MS);
    op.hold(0.2);
    op.path(side, &[start + Vector3::new(0.0, 0.0, 0.05), start], TIP_SPEED);
    op.hold(0.2);
    op.grip(side, 1.0);
    op.hold(0.2);
    if yank {
        op.jerk_master(side, Vector3::new(0.4, 0.0, 0.0));
        op.hold(0.5);
        return op.into_frames();
    }
    let clear = Vector3::new(start.x, start.y, base.z + height + 0.02);
    op.path(
        side,
        &[clear, drop + Vector3::new(0.0, 0.0, 0.02), drop],
        TIP_SPEED * 0.5,
    );
    op.hold(0.2);
    op.grip(side, 0.0);
    op.hold(0.5);
    op.into_frames()
}

/// Fixture logs shipped with the engine: one clean run per bundled
/// scenario, a forced tower detach and a two-minute session.
pub const FIXTURE_NAMES: [&str; 7] = [
    "wrist_articulation_1",
    "clutch",
    "camera_0",
    "sea_spikes_1",
    "ring_tower_transfer_1",
    "ring_tower_transfer_1_detach",
    "sea_spikes_1_long",
];

/// Scenario a fixture log is meant to be replayed against.
pub fn fixture_scenario(name: &str) -> &str {
    match name {
        "ring_tower_transfer_1_detach" => "ring_tower_transfer_1",
        "sea_spikes_1_long" => "sea_spikes_1",
        other => other,
    }
}

/// Regenerates a fixture's frames under the default engine config.
pub fn fixture_frames(name: &str) -> Option<Vec<InputFrame>> {
    let cfg = EngineConfig::default();
    Some(match name {
        "wrist_articulation_1" => wrist_articulation_run(&cfg, WristRunStyle::default()),
        "clutch" => clutch_run(&cfg),
        "camera_0" => camera_run(&cfg),
        "sea_spikes_1" => sea_spikes_run(&cfg, FIXTURE_FRAME_MS, 0.2),
        "ring_tower_transfer_1" => ring_tower_run(&cfg, false),
        "ring_tower_transfer_1_detach" => ring_tower_run(&cfg, true),
        "sea_spikes_1_long" => sea_spikes_run(&cfg, 40, 26.0),
        _ => return None,
    })
}
