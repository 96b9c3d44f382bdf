//! Newton-Raphson inverse kinematics with a damped least-squares fallback.

use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::chain::{
    forward_kinematics, geometric_jacobian, normalize_and_clamp, pose_error, JointVector, KinematicChain,
};
use super::pose::{Pose, PoseVector};

/// Number of consecutive residual increases that declares divergence.
pub const DIVERGENCE_STREAK: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IkConfig {
    pub max_iterations: u32,
    /// Meters.
    pub position_tolerance: f64,
    /// Radians.
    pub orientation_tolerance: f64,
    pub damping_lambda: f64,
    /// Above this condition number the raw inverse is replaced by damped
    /// least squares.
    pub condition_threshold: f64,
    /// Largest per-iteration joint change, radians.
    pub step_clamp: f64,
}

impl Default for IkConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            position_tolerance: 1e-6,
            orientation_tolerance: 1e-6,
            damping_lambda: 1e-2,
            condition_threshold: 1e6,
            step_clamp: 0.2,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("ik config field `{0}` must be strictly positive")]
pub struct IkConfigError(pub &'static str);

impl IkConfig {
    pub fn validate(&self) -> Result<(), IkConfigError> {
        let checks = [
            ("max_iterations", self.max_iterations as f64),
            ("position_tolerance", self.position_tolerance),
            ("orientation_tolerance", self.orientation_tolerance),
            ("damping_lambda", self.damping_lambda),
            ("condition_threshold", self.condition_threshold),
            ("step_clamp", self.step_clamp),
        ];
        for (name, v) in checks {
            if !(v > 0.0) || !v.is_finite() {
                return Err(IkConfigError(name));
            }
        }
        Ok(())
    }

    fn within_tolerance(&self, residual: &PoseVector) -> bool {
        residual.position_norm() < self.position_tolerance
            && residual.orientation_norm() < self.orientation_tolerance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IkStatus {
    Converged,
    MaxIterations,
    Diverged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkResult {
    pub theta: JointVector,
    pub iterations: u32,
    pub residual: PoseVector,
    pub status: IkStatus,
}

/// Condition number `σ_max / σ_min` of a 6×6 matrix; infinite when singular.
pub fn condition_number(m: &Matrix6<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn newton_step(jac: &Matrix6<f64>, err: &Vector6<f64>, cfg: &IkConfig) -> Vector6<f64> {
    if condition_number(jac) <= cfg.condition_threshold {
        if let Some(step) = jac.lu().solve(err) {
            return step;
        }
    }
    // (JᵀJ + λ²I)⁻¹ Jᵀ e
    let jt = jac.transpose();
    let lambda2 = cfg.damping_lambda * cfg.damping_lambda;
    let normal = jt * jac + Matrix6::identity() * lambda2;
    let rhs = jt * err;
    match normal.cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => Vector6::zeros(),
    }
}

/// Iterates `θ ← θ + J⁻¹(θ)·pose_error(target, FK(θ))` from `seed`.
///
/// Every iterate is wrapped into `(−π, π]` and clamped to the joint limits,
/// and each step's ∞-norm is limited to `cfg.step_clamp`.
pub fn solve_ik(chain: &KinematicChain, target: &Pose, seed: &JointVector, cfg: &IkConfig) -> IkResult {
    let mut theta = normalize_and_clamp(chain, seed);
    let mut last_norm = f64::INFINITY;
    let mut growth = 0;
    let mut iterations = 0;

    loop {
        let residual = pose_error(target, &forward_kinematics(chain, &theta));
        if cfg.within_tolerance(&residual) {
            return IkResult {
                theta,
                iterations,
                residual,
                status: IkStatus::Converged,
            };
        }

        let norm = residual.norm();
        if norm > last_norm {
            growth += 1;
            if growth >= DIVERGENCE_STREAK {
                return IkResult {
                    theta,
                    iterations,
                    residual,
                    status: IkStatus::Diverged,
                };
            }
        } else {
            growth = 0;
        }
        last_norm = norm;

        if iterations >= cfg.max_iterations {
            return IkResult {
                theta,
                iterations,
                residual,
                status: IkStatus::MaxIterations,
            };
        }

        let jac = geometric_jacobian(chain, &theta);
        let mut step = newton_step(&jac, &residual.to_vector(), cfg);
        let inf = step.amax();
        if inf > cfg.step_clamp {
            step *= cfg.step_clamp / inf;
        }
        theta = normalize_and_clamp(chain, &(theta + step));
        iterations += 1;
    }
}
