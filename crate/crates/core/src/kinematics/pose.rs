//! Rigid transforms and rotation-vector conversions.
//!
//! Rotations are carried as plain 3×3 matrices. All transcendental functions
//! go through `libm` so that results are bit-identical across platforms.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::Mul;

/// Maximum tolerated deviation of `RᵀR` from identity for a valid pose.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

/// Rigid transform: rotation followed by translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "PoseRepr", try_from = "PoseRepr")]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Self {
        Self {
            rotation,
            translation: Vector3::zeros(),
        }
    }

    /// `self ∘ other`: express `other` (given in this pose's frame) in the parent frame.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, point: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * point + self.translation
    }

    /// The 4×4 homogeneous matrix `[R p; 0 1]`.
    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_homogeneous(m: &Matrix4<f64>) -> Pose {
        Pose {
            rotation: m.fixed_view::<3, 3>(0, 0).into_owned(),
            translation: m.fixed_view::<3, 1>(0, 3).into_owned(),
        }
    }

    /// Max-abs entry of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.rotation)
    }

    pub fn is_valid(&self) -> bool {
        self.rotation.iter().all(|v| v.is_finite())
            && self.translation.iter().all(|v| v.is_finite())
            && self.orthonormality_error() < ORTHONORMAL_TOLERANCE
            && self.rotation.determinant() > 0.0
    }

    pub fn orthonormalized(&self) -> Pose {
        Pose {
            rotation: orthonormalize(&self.rotation),
            translation: self.translation,
        }
    }

    /// Pose whose +x axis points from `eye` toward `target`, with +z kept as
    /// close to world up as possible.
    pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>) -> Pose {
        let forward = (target - eye).normalize();
        let up = Vector3::z();
        let mut left = up.cross(&forward);
        if left.norm() < 1e-9 {
            left = Vector3::y();
        }
        let left = left.normalize();
        let up = forward.cross(&left);
        Pose {
            rotation: Matrix3::from_columns(&[forward, left, up]),
            translation: eye,
        }
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl<'a> Mul<&'a Pose> for &'a Pose {
    type Output = Pose;

    fn mul(self, rhs: &'a Pose) -> Pose {
        self.compose(rhs)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRepr {
    translation: [f64; 3],
    /// Row-major.
    rotation: [[f64; 3]; 3],
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        let r = &p.rotation;
        PoseRepr {
            translation: [p.translation.x, p.translation.y, p.translation.z],
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
        }
    }
}

impl TryFrom<PoseRepr> for Pose {
    type Error = String;

    fn try_from(r: PoseRepr) -> Result<Self, Self::Error> {
        let rot = Matrix3::from_fn(|i, j| r.rotation[i][j]);
        let pose = Pose {
            rotation: rot,
            translation: Vector3::from(r.translation),
        };
        if !pose.is_valid() {
            return Err("rotation is not a proper orthonormal matrix".to_string());
        }
        Ok(pose)
    }
}

/// 6-vector task-space quantity: position part and rotation-vector part.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseVector {
    pub position: Vector3<f64>,
    pub orientation: Vector3<f64>,
}

impl PoseVector {
    pub fn new(position: Vector3<f64>, orientation: Vector3<f64>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn zeros() -> Self {
        Self::default()
    }

    /// Rows 0–2 position, 3–5 orientation.
    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.position.x,
            self.position.y,
            self.position.z,
            self.orientation.x,
            self.orientation.y,
            self.orientation.z,
        )
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            position: Vector3::new(v[0], v[1], v[2]),
            orientation: Vector3::new(v[3], v[4], v[5]),
        }
    }

    pub fn from_pose(pose: &Pose) -> Self {
        Self {
            position: pose.translation,
            orientation: rotation_log(&pose.rotation),
        }
    }

    pub fn to_pose(&self) -> Pose {
        Pose {
            rotation: rotation_exp(&self.orientation),
            translation: self.position,
        }
    }

    pub fn position_norm(&self) -> f64 {
        self.position.norm()
    }

    pub fn orientation_norm(&self) -> f64 {
        self.orientation.norm()
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues' formula for the rotation `exp([ω]×)`.
pub fn rotation_exp(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = omega.norm_squared();
    let k = skew(omega);
    let k2 = k * k;
    let (a, b) = if theta2 < 1e-12 {
        // Taylor expansions of sinθ/θ and (1−cosθ)/θ².
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let theta = libm::sqrt(theta2);
        (libm::sin(theta) / theta, (1.0 - libm::cos(theta)) / theta2)
    };
    Matrix3::identity() + k * a + k2 * b
}

pub fn axis_angle(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    rotation_exp(&(axis.normalize() * angle))
}

/// Principal-branch rotation vector of `r`, with angle in `[0, π]`.
///
/// At exactly π the axis sign is ambiguous; the axis whose first nonzero
/// component is positive is returned.
pub fn rotation_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let v = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    ) * 0.5;
    let sin_theta = v.norm();
    let cos_theta = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = libm::atan2(sin_theta, cos_theta);

    if theta < 1e-6 {
        // θ/sinθ ≈ 1 + θ²/6
        return v * (1.0 + theta * theta / 6.0);
    }
    if cos_theta > -0.9 {
        return v * (theta / sin_theta);
    }

    // Near π: recover the axis from the symmetric part, aaᵀ = (R − cosθ·I)/(1 − cosθ).
    let s = (r + r.transpose()) * 0.5;
    let m = (s - Matrix3::identity() * cos_theta) / (1.0 - cos_theta);
    let mut k = 0;
    for i in 1..3 {
        if m[(i, i)] > m[(k, k)] {
            k = i;
        }
    }
    let mut axis: Vector3<f64> = m.column(k).into_owned();
    axis /= axis.norm();
    // Within rounding of π the antisymmetric part is noise, so the sign
    // convention decides.
    let flip = if sin_theta < PI_SIGN_EPS {
        !first_nonzero_positive(&axis)
    } else {
        axis.dot(&v) < 0.0
    };
    if flip {
        axis = -axis;
    }
    axis * theta
}

const PI_SIGN_EPS: f64 = 1e-12;

fn first_nonzero_positive(v: &Vector3<f64>) -> bool {
    for &c in v.iter() {
        if c.abs() > PI_SIGN_EPS {
            return c > 0.0;
        }
    }
    true
}

/// Rotation angle of `r` in `[0, π]`.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    rotation_log(r).norm()
}

pub fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).amax()
}

/// Projects a near-orthonormal matrix back onto SO(3) with Newton polar
/// iterations `R ← R (3I − RᵀR) / 2`.
pub fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let mut m = *r;
    for _ in 0..3 {
        let err = m.transpose() * m;
        if (err - Matrix3::identity()).amax() < 1e-15 {
            break;
        }
        m = m * (Matrix3::identity() * 3.0 - err) * 0.5;
    }
    m
}

/// Rotation matrix from a unit quaternion given as `[w, x, y, z]`.
///
/// The quaternion is normalized first.
pub fn quaternion_to_rotation(q: [f64; 4]) -> Matrix3<f64> {
    let n = libm::sqrt(q.iter().map(|c| c * c).sum::<f64>());
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Unit quaternion `[w, x, y, z]` with `w ≥ 0`.
pub fn rotation_to_quaternion(r: &Matrix3<f64>) -> [f64; 4] {
    let omega = rotation_log(r);
    let theta = omega.norm();
    if theta < 1e-12 {
        return [1.0, omega.x * 0.5, omega.y * 0.5, omega.z * 0.5];
    }
    let half = theta * 0.5;
    let s = libm::sin(half) / theta;
    [libm::cos(half), omega.x * s, omega.y * s, omega.z * s]
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}
