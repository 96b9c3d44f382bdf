use nalgebra::{Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use super::pose::{axis_angle, wrap_angle, Pose, PoseVector};

pub const JOINT_COUNT: usize = 6;

/// Revolute joint angles in radians.
pub type JointVector = Vector6<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointLimits {
    pub min: f64,
    pub max: f64,
}

impl JointLimits {
    pub fn symmetric(bound: f64) -> Self {
        Self {
            min: -bound,
            max: bound,
        }
    }
}

/// One revolute joint. The joint frame is `parent ∘ offset`, and the joint
/// rotates about `axis` expressed in that frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Joint {
    pub axis: Vector3<f64>,
    pub offset: Pose,
    pub limits: JointLimits,
}

#[derive(Debug, Error, PartialEq)]
pub enum ChainError {
    #[error("joint {0}: axis must have unit norm (got {1})")]
    AxisNotUnit(usize, f64),
    #[error("joint {0}: limits must satisfy min < max")]
    BadLimits(usize),
    #[error("home angle of joint {0} lies outside its limits")]
    HomeOutOfLimits(usize),
}

/// Six-joint revolute serial arm mounted at `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinematicChain {
    #[serde(default)]
    pub base: Pose,
    pub joints: [Joint; JOINT_COUNT],
    pub tool: Pose,
    pub home: [f64; JOINT_COUNT],
}

impl Default for KinematicChain {
    fn default() -> Self {
        Self::default_arm(Pose::identity())
    }
}

impl KinematicChain {
    /// Shoulder yaw/pitch and elbow pitch followed by a three-joint wrist
    /// (pitch, yaw, roll). Link lengths 0.30 / 0.25 / 0.05 / 0.05 m plus a
    /// 0.04 m tool; the tool tip sits on the roll axis.
    pub fn default_arm(base: Pose) -> Self {
        let lim = JointLimits::symmetric(2.6);
        let joint = |axis: Vector3<f64>, offset: [f64; 3], limits| Joint {
            axis,
            offset: Pose::from_translation(Vector3::from(offset)),
            limits,
        };
        Self {
            base,
            joints: [
                joint(Vector3::z(), [0.0, 0.0, 0.0], lim),
                joint(Vector3::y(), [0.0, 0.0, 0.0], lim),
                joint(Vector3::y(), [0.0, 0.0, 0.30], lim),
                joint(Vector3::y(), [0.25, 0.0, 0.0], lim),
                joint(Vector3::z(), [0.05, 0.0, 0.0], lim),
                joint(Vector3::x(), [0.05, 0.0, 0.0], JointLimits::symmetric(PI)),
            ],
            tool: Pose::from_translation(Vector3::new(0.04, 0.0, 0.0)),
            home: [0.0; JOINT_COUNT],
        }
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        for (i, j) in self.joints.iter().enumerate() {
            let n = j.axis.norm();
            if (n - 1.0).abs() > 1e-12 {
                return Err(ChainError::AxisNotUnit(i, n));
            }
            if !(j.limits.min < j.limits.max) {
                return Err(ChainError::BadLimits(i));
            }
            if self.home[i] < j.limits.min || self.home[i] > j.limits.max {
                return Err(ChainError::HomeOutOfLimits(i));
            }
        }
        Ok(())
    }

    pub fn home(&self) -> JointVector {
        JointVector::from(self.home)
    }

    /// Upper bound on the tool-tip distance from the base origin.
    pub fn max_reach(&self) -> f64 {
        self.joints
            .iter()
            .map(|j| j.offset.translation.norm())
            .sum::<f64>()
            + self.tool.translation.norm()
    }

    /// World frames of each joint after its own rotation, followed by the tool
    /// tip frame (seven poses).
    pub fn link_frames(&self, theta: &JointVector) -> [Pose; JOINT_COUNT + 1] {
        let mut frames = [Pose::identity(); JOINT_COUNT + 1];
        let mut t = self.base;
        for (i, j) in self.joints.iter().enumerate() {
            t = t
                .compose(&j.offset)
                .compose(&Pose::from_rotation(axis_angle(&j.axis, theta[i])));
            frames[i] = t;
        }
        frames[JOINT_COUNT] = t.compose(&self.tool);
        frames
    }
}

pub fn forward_kinematics(chain: &KinematicChain, theta: &JointVector) -> Pose {
    chain.link_frames(theta)[JOINT_COUNT]
}

/// Task-space error that, applied at `current`, reaches `target`: position
/// difference and the rotation vector of `target · currentᵀ`.
pub fn pose_error(target: &Pose, current: &Pose) -> PoseVector {
    PoseVector {
        position: target.translation - current.translation,
        orientation: super::pose::rotation_log(&(target.rotation * current.rotation.transpose())),
    }
}

/// Space-frame geometric Jacobian. Column `i` is `(aᵢ × (p_tip − pᵢ), aᵢ)`
/// with `aᵢ` the world joint axis and `pᵢ` the joint origin.
pub fn geometric_jacobian(chain: &KinematicChain, theta: &JointVector) -> Matrix6<f64> {
    let mut origins = [Vector3::zeros(); JOINT_COUNT];
    let mut axes = [Vector3::zeros(); JOINT_COUNT];
    let mut t = chain.base;
    for (i, j) in chain.joints.iter().enumerate() {
        t = t.compose(&j.offset);
        origins[i] = t.translation;
        axes[i] = t.rotation * j.axis;
        t = t.compose(&Pose::from_rotation(axis_angle(&j.axis, theta[i])));
    }
    let tip = t.compose(&chain.tool).translation;

    let mut jac = Matrix6::zeros();
    for i in 0..JOINT_COUNT {
        let lin = axes[i].cross(&(tip - origins[i]));
        jac.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
        jac.fixed_view_mut::<3, 1>(3, i).copy_from(&axes[i]);
    }
    jac
}

/// Central-difference Jacobian of forward kinematics, measured through
/// `pose_error`.
pub fn numeric_jacobian(chain: &KinematicChain, theta: &JointVector, h: f64) -> Matrix6<f64> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut jac = Matrix6::zeros();
    for i in 0..JOINT_COUNT {
        let mut plus = *theta;
        let mut minus = *theta;
        plus[i] += h;
        minus[i] -= h;
        let d = pose_error(
            &forward_kinematics(chain, &plus),
            &forward_kinematics(chain, &minus),
        )
        .to_vector()
            / (2.0 * h);
        jac.set_column(i, &d);
    }
    jac
}

pub fn clamp_to_limits(chain: &KinematicChain, theta: &JointVector) -> JointVector {
    JointVector::from_fn(|i, _| {
        let l = chain.joints[i].limits;
        theta[i].clamp(l.min, l.max)
    })
}

/// Wraps every angle into `(−π, π]`, then clamps into the joint limits.
pub fn normalize_and_clamp(chain: &KinematicChain, theta: &JointVector) -> JointVector {
    clamp_to_limits(chain, &theta.map(wrap_angle))
}

/// Rate-limited move from `current` toward `desired`.
pub fn smooth_joint_step(
    current: &JointVector,
    desired: &JointVector,
    dt: f64,
    rate_limit: f64,
) -> JointVector {
    assert!(dt > 0.0, "dt must be positive");
    let max_step = rate_limit * dt;
    JointVector::from_fn(|i, _| {
        let gap = desired[i] - current[i];
        if gap.abs() <= max_step {
            desired[i]
        } else {
            current[i] + max_step.copysign(gap)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Matrix3;

    #[test]
    fn default_chain_is_valid() {
        let c = KinematicChain::default();
        c.validate().unwrap();
        assert_relative_eq!(c.max_reach(), 0.69, epsilon = 1e-12);
    }

    #[test]
    fn home_pose_is_composition_of_offsets() {
        let c = KinematicChain::default();
        let p = forward_kinematics(&c, &c.home());
        let mut expected = c.base;
        for j in &c.joints {
            expected = expected.compose(&j.offset);
        }
        expected = expected.compose(&c.tool);
        assert_eq!(p.rotation, Matrix3::identity());
        assert_relative_eq!(p.translation, expected.translation, epsilon = 1e-15);
        assert_relative_eq!(p.translation, Vector3::new(0.39, 0.0, 0.30), epsilon = 1e-15);
    }

    #[test]
    fn half_turn_of_base_joint_reflects_tip() {
        let c = KinematicChain::default();
        let home = forward_kinematics(&c, &c.home()).translation;
        let mut theta = c.home();
        theta[0] = PI;
        let p = forward_kinematics(&c, &theta).translation;
        // Joint 1 is the world z axis through the origin.
        assert_relative_eq!(p, Vector3::new(-home.x, -home.y, home.z), epsilon = 1e-12);
    }

    #[test]
    fn fk_is_bit_deterministic() {
        let c = KinematicChain::default();
        let th = JointVector::new(0.1, -0.7, 1.2, 0.3, -2.0, 2.9);
        let a = forward_kinematics(&c, &th);
        let b = forward_kinematics(&c, &th);
        assert_eq!(a, b);
    }

    #[test]
    fn pose_error_examples() {
        let p = Pose::new(
            axis_angle(&Vector3::new(0.3, 0.1, 1.0), 0.4),
            Vector3::new(0.2, 0.1, 0.3),
        );
        assert_eq!(pose_error(&p, &p).to_vector(), Vector6::zeros());

        let shifted = Pose::new(p.rotation, p.translation - Vector3::new(0.1, 0.0, 0.0));
        let e = pose_error(&p, &shifted);
        assert_relative_eq!(
            e.to_vector(),
            Vector6::new(0.1, 0.0, 0.0, 0.0, 0.0, 0.0),
            epsilon = 1e-15
        );

        let target = Pose::identity();
        let current = Pose::from_rotation(axis_angle(&Vector3::z(), -PI / 2.0));
        let e = pose_error(&target, &current);
        assert_relative_eq!(
            e.to_vector(),
            Vector6::new(0.0, 0.0, 0.0, 0.0, 0.0, PI / 2.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn jacobian_column_textbook_form_at_zero() {
        let c = KinematicChain::default();
        let j = geometric_jacobian(&c, &JointVector::zeros());
        let tip = Vector3::new(0.39, 0.0, 0.30);
        // Joint 1 sits at the origin with axis z.
        let col0: Vector6<f64> = j.column(0).into_owned();
        let lin = Vector3::z().cross(&tip);
        assert_relative_eq!(
            col0,
            Vector6::new(lin.x, lin.y, lin.z, 0.0, 0.0, 1.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn tip_on_roll_axis_has_no_linear_contribution() {
        let c = KinematicChain::default();
        let th = JointVector::new(0.3, -0.4, 0.9, 0.2, 0.5, -1.0);
        let g = geometric_jacobian(&c, &th);
        let n = numeric_jacobian(&c, &th, 1e-6);
        for r in 0..3 {
            assert!(g[(r, 5)].abs() < 1e-15);
            assert!(n[(r, 5)].abs() < 1e-9);
        }
    }

    #[test]
    fn clamp_examples() {
        let c = KinematicChain::default();
        let inside = JointVector::new(0.1, -0.2, 0.3, 1.0, -1.0, 3.0);
        assert_eq!(clamp_to_limits(&c, &inside), inside);
        let mut above = inside;
        above[2] = 5.0;
        assert_eq!(clamp_to_limits(&c, &above)[2], 2.6);
        let below = JointVector::repeat(-10.0);
        let mins = JointVector::from_fn(|i, _| c.joints[i].limits.min);
        assert_eq!(clamp_to_limits(&c, &below), mins);
    }

    #[test]
    fn normalization_happens_before_clamp() {
        let c = KinematicChain::default();
        // 2π + 0.1 wraps to 0.1 rather than clamping to 2.6.
        let th = JointVector::new(2.0 * PI + 0.1, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_relative_eq!(normalize_and_clamp(&c, &th)[0], 0.1, epsilon = 1e-12);
    }

    #[test]
    fn smoothing_examples() {
        let cur = JointVector::repeat(0.3);
        assert_eq!(smooth_joint_step(&cur, &cur, 0.01, 1.0), cur);

        let mut des = cur;
        des[0] += 0.1;
        des[1] -= 0.1;
        let s = smooth_joint_step(&cur, &des, 0.01, 1.0);
        assert_relative_eq!(s[0] - cur[0], 0.01, epsilon = 1e-15);
        assert_relative_eq!(s[1] - cur[1], -0.01, epsilon = 1e-15);

        let mut near = cur;
        near[3] += 0.005;
        assert_eq!(smooth_joint_step(&cur, &near, 0.01, 1.0), near);
    }

    #[test]
    fn chain_serde_round_trip() {
        let c = KinematicChain::default();
        let s = serde_json::to_string(&c).unwrap();
        let back: KinematicChain = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn central_difference_error_is_second_order() {
        let c = KinematicChain::default();
        let theta = JointVector::new(0.3, -0.4, 0.9, -0.2, 0.5, 0.7);
        let exact = geometric_jacobian(&c, &theta);
        let e1 = (numeric_jacobian(&c, &theta, 1e-2) - exact).amax();
        let e2 = (numeric_jacobian(&c, &theta, 5e-3) - exact).amax();
        let ratio = e1 / e2;
        assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
    }
}
