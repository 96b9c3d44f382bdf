use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::footboard::{PedalLayout, Side};
use crate::kinematics::{IkConfig, KinematicChain, Pose};
use crate::teleop::TeleopConfig;

pub const CONFIG_VERSION: u32 = 1;

/// Lateral offset of each arm base from the midline, meters.
pub const ARM_BASE_OFFSET: f64 = 0.12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmsConfig {
    pub left: KinematicChain,
    pub right: KinematicChain,
}

impl Default for ArmsConfig {
    fn default() -> Self {
        let at = |y| KinematicChain::default_arm(Pose::from_translation(Vector3::new(0.0, y, 0.0)));
        Self {
            left: at(ARM_BASE_OFFSET),
            right: at(-ARM_BASE_OFFSET),
        }
    }
}

impl ArmsConfig {
    pub fn chain(&self, side: Side) -> &KinematicChain {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub eye: Vector3<f64>,
    pub look_at: Vector3<f64>,
    /// Tips further than this from the view axis are out of view, radians.
    pub view_half_angle: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            eye: Vector3::new(-0.05, 0.0, 0.55),
            look_at: Vector3::new(0.42, 0.0, 0.2),
            view_half_angle: 0.6,
        }
    }
}

impl CameraConfig {
    pub fn initial_pose(&self) -> Pose {
        Pose::look_at(self.eye, self.look_at)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    /// Meters charged per radian of frame rotation in economy of motion.
    pub beta: f64,
    /// Virtual-spring stiffness of the force proxy, force units per meter.
    pub force_stiffness: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            beta: 0.05,
            force_stiffness: 500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub version: u32,
    /// Fixed step, seconds. Must be a whole number of milliseconds.
    pub tick: f64,
    pub arms: ArmsConfig,
    pub teleop: TeleopConfig,
    pub ik: IkConfig,
    /// Joint speed limit applied after IK, rad/s.
    pub smoothing_rate: f64,
    pub pedals: PedalLayout,
    /// Foot icon growth per meter of foot height.
    pub minimap_gain: f64,
    pub camera: CameraConfig,
    pub scoring: ScoringConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            tick: 0.01,
            arms: ArmsConfig::default(),
            teleop: TeleopConfig::default(),
            ik: IkConfig::default(),
            smoothing_rate: 4.0,
            pedals: PedalLayout::default(),
            minimap_gain: 2.0,
            camera: CameraConfig::default(),
            scoring: ScoringConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config is not valid JSON: {0}")]
    Syntax(String),
    #[error("unsupported config version {0}")]
    Version(u32),
    #[error("`{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.to_string(),
    }
}

impl EngineConfig {
    /// Step length in whole milliseconds.
    pub fn tick_ms(&self) -> u64 {
        libm::round(self.tick * 1000.0) as u64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(ConfigError::Version(self.version));
        }
        let ms = self.tick * 1000.0;
        if !(self.tick > 0.0) || ms < 1.0 || (ms - libm::round(ms)).abs() > 1e-9 {
            return Err(invalid("tick", "must be a positive whole number of milliseconds"));
        }
        self.arms.left.validate().map_err(|e| invalid("arms.left", e))?;
        self.arms.right.validate().map_err(|e| invalid("arms.right", e))?;
        self.teleop.validate().map_err(|e| invalid("teleop", e))?;
        self.ik.validate().map_err(|e| invalid("ik", e))?;
        if !(self.smoothing_rate > 0.0) {
            return Err(invalid("smoothing_rate", "must be positive"));
        }
        self.pedals.validate().map_err(|e| invalid("pedals", e))?;
        if !(self.minimap_gain >= 0.0) {
            return Err(invalid("minimap_gain", "must be non-negative"));
        }
        if !(self.camera.view_half_angle > 0.0) || (self.camera.look_at - self.camera.eye).norm() == 0.0 {
            return Err(invalid(
                "camera",
                "needs a positive half-angle and distinct eye and look_at",
            ));
        }
        if !(self.scoring.beta >= 0.0) {
            return Err(invalid("scoring.beta", "must be non-negative"));
        }
        if !(self.scoring.force_stiffness > 0.0) {
            return Err(invalid("scoring.force_stiffness", "must be positive"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

/// Parses and validates a config document. Omitted keys take their defaults.
pub fn load_config(text: &str) -> Result<EngineConfig, ConfigError> {
    let cfg: EngineConfig = serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
