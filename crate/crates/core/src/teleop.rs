//! Master-to-end-effector motion mapping with clutch (indexing) and camera
//! modes.
//!
//! The desired end-effector orientation is `R_now · R_master0ᵀ · R_ee0`, and
//! the desired position is `p_ee0 + α (p_now − p_master0)`. Releasing the
//! clutch or camera pedal re-anchors at the current master pose and current
//! target, so the target never jumps.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::footboard::{PedalId, PedalState};
use crate::kinematics::{orthonormalize, rotation_exp, rotation_log, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeleopAnchor {
    pub master_initial: Pose,
    pub ee_initial: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeleopConfig {
    /// α in (0, 1].
    pub motion_scale: f64,
    pub camera_rotation_scale: f64,
    pub grip_close_threshold: f64,
}

impl Default for TeleopConfig {
    fn default() -> Self {
        Self {
            motion_scale: 0.25,
            camera_rotation_scale: 0.5,
            grip_close_threshold: 0.8,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TeleopConfigError {
    #[error("motion_scale must lie in (0, 1]")]
    MotionScale,
    #[error("camera_rotation_scale must be non-negative")]
    CameraScale,
    #[error("grip_close_threshold must lie in [0, 1]")]
    GripThreshold,
}

impl TeleopConfig {
    pub fn validate(&self) -> Result<(), TeleopConfigError> {
        if !(self.motion_scale > 0.0 && self.motion_scale <= 1.0) {
            return Err(TeleopConfigError::MotionScale);
        }
        if !(self.camera_rotation_scale >= 0.0) {
            return Err(TeleopConfigError::CameraScale);
        }
        if !(0.0..=1.0).contains(&self.grip_close_threshold) {
            return Err(TeleopConfigError::GripThreshold);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeleopMode {
    Following,
    Clutched,
    CameraDriving,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmTeleopState {
    pub anchor: TeleopAnchor,
    pub mode: TeleopMode,
    pub ee_target: Pose,
    /// 0 = open, 1 = jaws closed.
    pub grip_command: f64,
    /// Master pose seen on the previous tick; camera driving uses the
    /// per-tick increment.
    pub last_master: Pose,
}

impl ArmTeleopState {
    /// Starts following with the anchor taken at `(master, ee)`.
    pub fn new(master: Pose, ee: Pose) -> Self {
        Self {
            anchor: anchor(&master, &ee),
            mode: TeleopMode::Following,
            ee_target: ee,
            grip_command: 0.0,
            last_master: master,
        }
    }

    pub fn jaw_closed(&self, cfg: &TeleopConfig) -> bool {
        self.grip_command >= cfg.grip_close_threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraState {
    pub pose: Pose,
    pub thirty_degree_mode: bool,
}

impl CameraState {
    pub fn new(pose: Pose) -> Self {
        Self {
            pose,
            thirty_degree_mode: false,
        }
    }

    /// Unit view direction: the camera +x axis, pitched down 30° about the
    /// camera y axis in thirty-degree mode.
    pub fn view_direction(&self) -> Vector3<f64> {
        let local = if self.thirty_degree_mode {
            let a = std::f64::consts::FRAC_PI_6;
            Vector3::new(libm::cos(a), 0.0, -libm::sin(a))
        } else {
            Vector3::x()
        };
        self.pose.rotation * local
    }
}

pub fn anchor(master_pose: &Pose, ee_pose: &Pose) -> TeleopAnchor {
    TeleopAnchor {
        master_initial: *master_pose,
        ee_initial: *ee_pose,
    }
}

pub fn desired_orientation(a: &TeleopAnchor, master_now: &Matrix3<f64>) -> Matrix3<f64> {
    let r = master_now * a.master_initial.rotation.transpose() * a.ee_initial.rotation;
    orthonormalize(&r)
}

pub fn desired_position(a: &TeleopAnchor, master_pos_now: &Vector3<f64>, alpha: f64) -> Vector3<f64> {
    a.ee_initial.translation + (master_pos_now - a.master_initial.translation) * alpha
}

fn mapped_target(a: &TeleopAnchor, master: &Pose, alpha: f64) -> Pose {
    Pose {
        rotation: desired_orientation(a, &master.rotation),
        translation: desired_position(a, &master.translation, alpha),
    }
}

/// Advances one arm by a tick. Camera pedal wins over clutch when both are
/// down.
pub fn step_teleop(
    state: &ArmTeleopState,
    cam: &CameraState,
    master_pose: &Pose,
    grip_input: f64,
    pedals: &PedalState,
    cfg: &TeleopConfig,
) -> (ArmTeleopState, CameraState) {
    let mode = if pedals.is_pressed(PedalId::Camera) {
        TeleopMode::CameraDriving
    } else if pedals.is_pressed(PedalId::Clutch) {
        TeleopMode::Clutched
    } else {
        TeleopMode::Following
    };

    let mut next = *state;
    let mut camera = *cam;
    next.mode = mode;

    match mode {
        TeleopMode::Following => {
            if state.mode != TeleopMode::Following {
                next.anchor = anchor(master_pose, &state.ee_target);
            }
            next.ee_target = mapped_target(&next.anchor, master_pose, cfg.motion_scale);
            next.grip_command = grip_input.clamp(0.0, 1.0);
        }
        TeleopMode::Clutched => {}
        TeleopMode::CameraDriving => {
            let delta_p = master_pose.translation - state.last_master.translation;
            let delta_r = master_pose.rotation * state.last_master.rotation.transpose();
            let scaled = rotation_exp(&(rotation_log(&delta_r) * cfg.camera_rotation_scale));
            camera.pose = Pose {
                rotation: orthonormalize(&(scaled * cam.pose.rotation)),
                translation: cam.pose.translation + delta_p * cfg.motion_scale,
            };
        }
    }
    next.last_master = *master_pose;
    (next, camera)
}

pub fn toggle_thirty_degree(cam: &CameraState, pedal_edge: bool) -> CameraState {
    CameraState {
        pose: cam.pose,
        thirty_degree_mode: cam.thirty_degree_mode ^ pedal_edge,
    }
}
