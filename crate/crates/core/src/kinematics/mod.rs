//! Pose algebra, forward kinematics, Jacobians and the numerical IK solver
//! for a six-joint revolute arm.

mod chain;
mod ik;
mod pose;

pub use chain::{
    clamp_to_limits, forward_kinematics, geometric_jacobian, normalize_and_clamp, numeric_jacobian,
    pose_error, smooth_joint_step, ChainError, Joint, JointLimits, JointVector, KinematicChain, JOINT_COUNT,
};
pub use ik::{condition_number, solve_ik, IkConfig, IkConfigError, IkResult, IkStatus, DIVERGENCE_STREAK};
pub use pose::{
    axis_angle, orthonormality_error, orthonormalize, quaternion_to_rotation, rotation_angle, rotation_exp,
    rotation_log, rotation_to_quaternion, skew, wrap_angle, Pose, PoseVector, ORTHONORMAL_TOLERANCE,
};
