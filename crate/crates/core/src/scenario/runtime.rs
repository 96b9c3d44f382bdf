//! Action-graph state machine and geometric event detection.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::definition::{
    ActionKind, ActionNode, ScenarioDefinition, Shape, DEFAULT_AIM_TOLERANCE, DEFAULT_DWELL,
};
use crate::footboard::Side;
use crate::kinematics::Pose;
use crate::teleop::CameraState;

/// Minimum continuous time over the force limit that counts as one
/// excessive-force episode, seconds.
pub const FORCE_EPISODE_WINDOW: f64 = 0.05;

/// Event kinds. Declaration order is the within-tick ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Grasp,
    Release,
    Drop,
    Touch,
    Placed,
    Aimed,
    GlassBreak,
    ExcessiveForce,
    OutOfView,
    IkDiverged,
    TowerDetach,
    ActionComplete,
    ScenarioComplete,
    ScenarioFailed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub tick: u64,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm: Option<Side>,
}

impl SessionEvent {
    pub fn new(tick: u64, kind: EventKind, subject: Option<&str>, arm: Option<Side>) -> Self {
        Self {
            tick,
            kind,
            subject: subject.map(str::to_owned),
            arm,
        }
    }
}

/// Orders events by tick, then kind, keeping insertion order otherwise.
pub fn sort_events(events: &mut [SessionEvent]) {
    events.sort_by_key(|e| (e.tick, e.kind));
}

/// Virtual-spring contact force estimated from tracking error.
pub fn force_proxy(ee_target: &Pose, ee_actual: &Pose, stiffness: f64) -> f64 {
    stiffness * (ee_target.translation - ee_actual.translation).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmSample {
    /// Actual tool-tip pose.
    pub tip: Pose,
    /// Commanded tool-tip pose.
    pub target: Pose,
    pub grip: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInput {
    pub arms: [ArmSample; 2],
    pub camera: CameraState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeParams {
    pub force_stiffness: f64,
    pub grip_close_threshold: f64,
    /// Half-angle of the camera view cone, radians.
    pub view_half_angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub id: String,
    pub position: Vector3<f64>,
    pub held_by: Option<Side>,
    /// Object position in the holding tip's frame.
    pub grasp_offset: Vector3<f64>,
    pub mounted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
struct ArmTrack {
    in_target: bool,
    dwell: f64,
    force_over: f64,
    force_reported: bool,
    out_of_view: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRun {
    def: ScenarioDefinition,
    params: RuntimeParams,
    pub objects: Vec<ObjectState>,
    pub action_index: usize,
    pub repetition: u32,
    arms: [ArmTrack; 2],
    aim_inside: bool,
    /// Per object, per arm: tip currently inside the glass wall.
    in_wall: Vec<[bool; 2]>,
    tick: u64,
    pub outcome: Option<Outcome>,
}

impl ScenarioRun {
    pub fn new(def: ScenarioDefinition, params: RuntimeParams) -> Self {
        let objects = def
            .objects
            .iter()
            .map(|o| ObjectState {
                id: o.id.clone(),
                position: o.shape.center(),
                held_by: None,
                grasp_offset: Vector3::zeros(),
                mounted: o.mounted_on.is_some(),
            })
            .collect();
        let in_wall = vec![[false; 2]; def.objects.len()];
        Self {
            def,
            params,
            objects,
            action_index: 0,
            repetition: 0,
            arms: [ArmTrack::default(); 2],
            aim_inside: false,
            in_wall,
            tick: 0,
            outcome: None,
        }
    }

    pub fn definition(&self) -> &ScenarioDefinition {
        &self.def
    }

    pub fn is_halted(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn current_action(&self) -> Option<&ActionNode> {
        self.def.actions.get(self.action_index)
    }

    /// Center of the current repetition's target, if any.
    pub fn current_target_center(&self) -> Option<Vector3<f64>> {
        let action = self.current_action()?;
        let idx = self.def.object_index(action.target_for(self.repetition))?;
        Some(action.placed_center(self.objects[idx].position, self.repetition))
    }

    pub fn completed_repetitions(&self) -> u32 {
        self.def.actions[..self.action_index.min(self.def.actions.len())]
            .iter()
            .map(|a| a.repetitions)
            .sum::<u32>()
            + self.repetition
    }

    /// Advances one tick. Returns this tick's events in canonical order; a
    /// halted run returns nothing.
    pub fn step(&mut self, input: &StepInput, dt: f64) -> Vec<SessionEvent> {
        if self.is_halted() {
            return Vec::new();
        }
        let tick = self.tick;
        self.tick += 1;
        let mut events = Vec::new();
        let mut placed_now: Vec<usize> = Vec::new();

        // Held objects ride along with their tip.
        for o in &mut self.objects {
            if let Some(side) = o.held_by {
                o.position = input.arms[side.index()].tip.transform_point(&o.grasp_offset);
            }
        }

        for side in Side::BOTH {
            let arm = &input.arms[side.index()];
            let closed = arm.grip >= self.params.grip_close_threshold;
            let held = self.objects.iter().position(|o| o.held_by == Some(side));
            match held {
                Some(i) if !closed => {
                    let o = &mut self.objects[i];
                    o.held_by = None;
                    events.push(SessionEvent::new(
                        tick,
                        EventKind::Release,
                        Some(&o.id),
                        Some(side),
                    ));
                    if !o.mounted {
                        let in_target = self.def.objects[i]
                            .placement_target
                            .is_some_and(|r| r.contains(&o.position));
                        if in_target {
                            placed_now.push(i);
                        } else {
                            events.push(SessionEvent::new(tick, EventKind::Drop, Some(&o.id), Some(side)));
                        }
                    }
                }
                None if closed => {
                    if let Some(i) = self.graspable_near(&arm.tip.translation) {
                        let o = &mut self.objects[i];
                        o.held_by = Some(side);
                        o.grasp_offset = arm.tip.inverse().transform_point(&o.position);
                        events.push(SessionEvent::new(tick, EventKind::Grasp, Some(&o.id), Some(side)));
                    }
                }
                _ => {}
            }
        }

        // Lifting a threaded object above its tower frees it.
        for (i, o) in self.objects.iter_mut().enumerate() {
            if !o.mounted {
                continue;
            }
            if let Some(tower) = self.def.objects[i].mounted_on.as_deref() {
                if let Some(Shape::Tower { base, height, .. }) = self.def.object(tower).map(|t| t.shape) {
                    if o.position.z > base.z + height {
                        o.mounted = false;
                    }
                }
            }
        }

        for side in Side::BOTH {
            let arm = &input.arms[side.index()];
            let force = force_proxy(&arm.target, &arm.tip, self.params.force_stiffness);
            let Some(i) = self.objects.iter().position(|o| o.held_by == Some(side)) else {
                let t = &mut self.arms[side.index()];
                t.force_over = 0.0;
                t.force_reported = false;
                continue;
            };
            if self.objects[i].mounted {
                let tower = self.def.objects[i].mounted_on.clone().unwrap_or_default();
                if let Some(Shape::Tower { detach_force, .. }) = self.def.object(&tower).map(|t| t.shape) {
                    if force > detach_force {
                        events.push(SessionEvent::new(
                            tick,
                            EventKind::TowerDetach,
                            Some(&tower),
                            Some(side),
                        ));
                        events.push(SessionEvent::new(
                            tick,
                            EventKind::ScenarioFailed,
                            Some(&tower),
                            None,
                        ));
                        self.outcome = Some(Outcome::Failed);
                        sort_events(&mut events);
                        return events;
                    }
                }
            }
            let t = &mut self.arms[side.index()];
            if force > self.def.thresholds.force_limit {
                t.force_over += dt;
                if !t.force_reported && t.force_over + 1e-9 >= FORCE_EPISODE_WINDOW {
                    t.force_reported = true;
                    events.push(SessionEvent::new(
                        tick,
                        EventKind::ExcessiveForce,
                        Some(&self.objects[i].id),
                        Some(side),
                    ));
                }
            } else {
                t.force_over = 0.0;
                t.force_reported = false;
            }
        }

        for (i, obj) in self.def.objects.iter().enumerate() {
            let Shape::Shell {
                center,
                half_extents,
                thickness,
                open_top,
            } = obj.shape
            else {
                continue;
            };
            for side in Side::BOTH {
                let tip = input.arms[side.index()].tip.translation;
                let now = in_shell_wall(&tip, &center, &half_extents, thickness, open_top);
                if now && !self.in_wall[i][side.index()] {
                    events.push(SessionEvent::new(
                        tick,
                        EventKind::GlassBreak,
                        Some(&obj.id),
                        Some(side),
                    ));
                }
                self.in_wall[i][side.index()] = now;
            }
        }

        for side in Side::BOTH {
            let tip = input.arms[side.index()].tip.translation;
            let out = view_angle(&input.camera, &tip) > self.params.view_half_angle;
            let t = &mut self.arms[side.index()];
            if out && !t.out_of_view {
                events.push(SessionEvent::new(tick, EventKind::OutOfView, None, Some(side)));
            }
            t.out_of_view = out;
        }

        self.progress(tick, input, dt, &placed_now, &mut events);
        sort_events(&mut events);
        events
    }

    fn graspable_near(&self, tip: &Vector3<f64>) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, o) in self.objects.iter().enumerate() {
            let def = &self.def.objects[i];
            if !def.grabbable || o.held_by.is_some() {
                continue;
            }
            let d = (o.position - tip).norm();
            if d <= def.grasp_radius.unwrap_or(0.0) && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Evaluates the current repetition's completion condition for one arm
    /// (or the camera, for aiming).
    fn target_hit(&self, input: &StepInput, side: Side) -> bool {
        let Some(action) = self.current_action() else {
            return false;
        };
        let Some(center) = self.current_target_center() else {
            return false;
        };
        match action.kind {
            ActionKind::Touch | ActionKind::Place => {
                let obj = self.def.object(action.target_for(self.repetition));
                let radius = match obj.map(|o| o.shape) {
                    Some(Shape::Sphere { radius, .. }) => radius,
                    _ => return false,
                };
                (input.arms[side.index()].tip.translation - center).norm() <= radius
            }
            ActionKind::CameraAim => {
                view_angle(&input.camera, &center) <= action.tolerance.unwrap_or(DEFAULT_AIM_TOLERANCE)
            }
            ActionKind::Transfer => false,
        }
    }

    fn progress(
        &mut self,
        tick: u64,
        input: &StepInput,
        dt: f64,
        placed_now: &[usize],
        events: &mut Vec<SessionEvent>,
    ) {
        let Some(action) = self.current_action().cloned() else {
            return;
        };
        let target = action.target_for(self.repetition).to_owned();
        let advanced = match action.kind {
            ActionKind::Touch => {
                let mut hit = None;
                for side in Side::BOTH {
                    let inside = self.target_hit(input, side);
                    let t = &mut self.arms[side.index()];
                    if inside && !t.in_target && hit.is_none() {
                        hit = Some(side);
                    }
                    t.in_target = inside;
                }
                hit.map(|side| SessionEvent::new(tick, EventKind::Touch, Some(&target), Some(side)))
            }
            ActionKind::Place => {
                let required = action.dwell.unwrap_or(DEFAULT_DWELL);
                let mut hit = None;
                for side in Side::BOTH {
                    let inside = self.target_hit(input, side);
                    let t = &mut self.arms[side.index()];
                    t.dwell = if inside { t.dwell + dt } else { 0.0 };
                    if hit.is_none() && t.dwell + 1e-9 >= required {
                        hit = Some(side);
                    }
                }
                hit.map(|side| SessionEvent::new(tick, EventKind::Placed, Some(&target), Some(side)))
            }
            ActionKind::Transfer => placed_now
                .iter()
                .find(|&&i| self.objects[i].id == target)
                .map(|_| SessionEvent::new(tick, EventKind::Placed, Some(&target), None)),
            ActionKind::CameraAim => {
                let aimed = self.target_hit(input, Side::Left);
                let entered = aimed && !self.aim_inside;
                self.aim_inside = aimed;
                entered.then(|| SessionEvent::new(tick, EventKind::Aimed, Some(&target), None))
            }
        };

        let Some(event) = advanced else {
            return;
        };
        events.push(event);
        self.repetition += 1;
        if self.repetition >= action.repetitions {
            events.push(SessionEvent::new(
                tick,
                EventKind::ActionComplete,
                Some(&action.targets[0]),
                None,
            ));
            self.action_index += 1;
            self.repetition = 0;
            if self.action_index >= self.def.actions.len() {
                events.push(SessionEvent::new(
                    tick,
                    EventKind::ScenarioComplete,
                    Some(&self.def.id),
                    None,
                ));
                self.outcome = Some(Outcome::Completed);
                return;
            }
        }
        // A new target must be entered afresh.
        for side in Side::BOTH {
            let inside = self.target_hit(input, side);
            let t = &mut self.arms[side.index()];
            t.in_target = inside;
            t.dwell = 0.0;
        }
        self.aim_inside = self.target_hit(input, Side::Left);
    }
}

/// Tip inside the wall slab between the outer box and the inner cavity. With
/// an open top the cavity extends through the top face.
pub fn in_shell_wall(
    tip: &Vector3<f64>,
    center: &Vector3<f64>,
    half_extents: &Vector3<f64>,
    thickness: f64,
    open_top: bool,
) -> bool {
    let d = tip - center;
    let inside_outer = (0..3).all(|i| d[i].abs() <= half_extents[i]);
    if !inside_outer {
        return false;
    }
    let inner = half_extents.map(|h| h - thickness);
    let in_cavity =
        d.x.abs() < inner.x && d.y.abs() < inner.y && d.z > -inner.z && (open_top || d.z < inner.z);
    !in_cavity
}

/// Angle between the camera view direction and the ray to `point`.
pub fn view_angle(camera: &CameraState, point: &Vector3<f64>) -> f64 {
    let ray = point - camera.pose.translation;
    let n = ray.norm();
    if n == 0.0 {
        return 0.0;
    }
    let c = (camera.view_direction().dot(&ray) / n).clamp(-1.0, 1.0);
    libm::acos(c)
}
