//! Deterministic fixed-step simulation of a two-arm teleoperated surgical
//! trainer: master poses in, joint angles, scenario events and a score out.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod footboard;
pub mod kinematics;
pub mod scenario;
pub mod scoring;
pub mod script;
pub mod session;
pub mod teleop;
