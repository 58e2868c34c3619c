//! Rigid (SE(3)) and similarity (Sim(3)) transforms with exponential and
//! logarithm maps.
//!
//! Rotations are stored as unit quaternions and renormalized after every
//! composition. A similarity acts on points as `S·p = s·R·p + t`, i.e. scale
//! is applied before translation.
//!
//! Tangent vectors are ordered `(ω, ν, σ)`: three rotation components, three
//! translation components and the log-scale.

use nalgebra::{Matrix3, Quaternion, SVector, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use super::GeomError;

pub type Vector7 = SVector<f64, 7>;

/// Rotation angles closer than this to π are rejected by the logarithm.
const PI_MARGIN: f64 = 1e-10;

/// Below this rotation angle the closed forms are replaced by series.
const SMALL_ANGLE: f64 = 1e-4;

/// Skew-symmetric matrix such that `hat(a) * b == a.cross(&b)`.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn so3_exp(omega: &Vector3<f64>) -> UnitQuaternion<f64> {
    let theta = omega.norm();
    if theta < SMALL_ANGLE {
        // q = (cos θ/2, sin(θ/2)/θ · ω) with sin(θ/2)/θ ≈ 1/2 − θ²/48
        let half = 0.5 - theta * theta / 48.0;
        let w = 1.0 - theta * theta / 8.0;
        let q = Quaternion::new(w, half * omega.x, half * omega.y, half * omega.z);
        UnitQuaternion::new_normalize(q)
    } else {
        UnitQuaternion::from_scaled_axis(*omega)
    }
}

/// Rotation-vector logarithm. Fails when the angle is within `PI_MARGIN` of π,
/// where the axis sign is ambiguous.
pub fn so3_log(q: &UnitQuaternion<f64>) -> Result<Vector3<f64>, GeomError> {
    let mut w = q.w;
    let mut v = q.imag();
    if w < 0.0 {
        w = -w;
        v = -v;
    }
    let n = v.norm();
    let angle = 2.0 * n.atan2(w);
    if PI - angle < PI_MARGIN {
        return Err(GeomError::RotationAtPi);
    }
    if n < 1e-12 {
        // angle / n ≈ (2 / w)(1 − n²/(3w²))
        let f = 2.0 / w * (1.0 - n * n / (3.0 * w * w));
        return Ok(v * f);
    }
    Ok(v * (angle / n))
}

/// Coefficients `(a, b, c)` of `V = a·I + b·[ω]× + c·[ω]×²`, the matrix mapping
/// the translational tangent to the group translation for Sim(3). With
/// `sigma = 0` this is the SE(3) left Jacobian of SO(3).
fn translation_coefficients(theta: f64, sigma: f64) -> (f64, f64, f64) {
    let small_sigma = sigma.abs() < 1e-5;
    let a = if small_sigma {
        1.0 + sigma / 2.0 + sigma * sigma / 6.0
    } else {
        sigma.exp_m1() / sigma
    };
    if theta < SMALL_ANGLE {
        let (b, c) = if small_sigma {
            (
                0.5 + sigma / 3.0 + sigma * sigma / 8.0,
                1.0 / 6.0 + sigma / 8.0 + sigma * sigma / 20.0,
            )
        } else {
            let es = sigma.exp();
            let s2 = sigma * sigma;
            (
                (es * (sigma - 1.0) + 1.0) / s2,
                (es * (s2 - 2.0 * sigma + 2.0) - 2.0) / (2.0 * s2 * sigma),
            )
        };
        return (a, b, c);
    }
    let es = sigma.exp();
    let (st, ct) = theta.sin_cos();
    let denom = sigma * sigma + theta * theta;
    let int_sin = (es * (sigma * st - theta * ct) + theta) / denom;
    let int_cos = (es * (sigma * ct + theta * st) - sigma) / denom;
    let b = int_sin / theta;
    let c = (a - int_cos) / (theta * theta);
    (a, b, c)
}

fn translation_matrix(omega: &Vector3<f64>, sigma: f64) -> Matrix3<f64> {
    let (a, b, c) = translation_coefficients(omega.norm(), sigma);
    let k = hat(omega);
    Matrix3::identity() * a + k * b + k * k * c
}

fn renormalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::new_normalize(q.into_inner())
}

/// A 7-vector in the Lie algebra of Sim(3): `(ω, ν, σ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tangent7(pub Vector7);

impl Tangent7 {
    pub fn new(omega: Vector3<f64>, nu: Vector3<f64>, sigma: f64) -> Self {
        let mut v = Vector7::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&omega);
        v.fixed_rows_mut::<3>(3).copy_from(&nu);
        v[6] = sigma;
        Tangent7(v)
    }

    pub fn zero() -> Self {
        Tangent7(Vector7::zeros())
    }

    pub fn omega(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(0).into_owned()
    }

    pub fn nu(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(3).into_owned()
    }

    pub fn sigma(&self) -> f64 {
        self.0[6]
    }

    pub fn as_vector(&self) -> &Vector7 {
        &self.0
    }
}

/// Rigid transform `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "PoseRepr", try_from = "PoseRepr")]
pub struct SE3 {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

impl SE3 {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        SE3 {
            rotation: renormalize(rotation),
            translation,
        }
    }

    pub fn identity() -> Self {
        SE3 {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        SE3::new(UnitQuaternion::identity(), t)
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn compose(&self, other: &SE3) -> SE3 {
        SE3 {
            rotation: renormalize(self.rotation * other.rotation),
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> SE3 {
        let r_inv = self.rotation.inverse();
        SE3 {
            rotation: r_inv,
            translation: -(r_inv * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Exponential of a 6-vector `(ω, ν)`.
    pub fn exp(omega: &Vector3<f64>, nu: &Vector3<f64>) -> SE3 {
        SE3 {
            rotation: so3_exp(omega),
            translation: translation_matrix(omega, 0.0) * nu,
        }
    }

    pub fn log(&self) -> Result<(Vector3<f64>, Vector3<f64>), GeomError> {
        let omega = so3_log(&self.rotation)?;
        let v = translation_matrix(&omega, 0.0);
        let nu = v
            .lu()
            .solve(&self.translation)
            .ok_or(GeomError::Singular)?;
        Ok((omega, nu))
    }

    pub fn approx_eq(&self, other: &SE3, tol: f64) -> bool {
        self.rotation.angle_to(&other.rotation) <= tol
            && (self.translation - other.translation).norm() <= tol
    }
}

impl fmt::Display for SE3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = self.rotation;
        let t = self.translation;
        write!(
            f,
            "SE3(t: [{:.4}, {:.4}, {:.4}], q: [{:.4}, {:.4}, {:.4}, {:.4}])",
            t.x, t.y, t.z, q.i, q.j, q.k, q.w
        )
    }
}

/// Similarity transform `p ↦ s·R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "PoseRepr", try_from = "PoseRepr")]
pub struct Sim3 {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
    scale: f64,
}

impl Sim3 {
    pub fn new(
        rotation: UnitQuaternion<f64>,
        translation: Vector3<f64>,
        scale: f64,
    ) -> Result<Self, GeomError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(GeomError::NonPositiveScale(scale));
        }
        Ok(Sim3 {
            rotation: renormalize(rotation),
            translation,
            scale,
        })
    }

    pub fn identity() -> Self {
        Sim3 {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    /// Upgrades a rigid transform; the scale is exactly 1.
    pub fn from_se3(pose: &SE3) -> Self {
        Sim3 {
            rotation: pose.rotation,
            translation: pose.translation,
            scale: 1.0,
        }
    }

    /// Drops the scale, keeping rotation and translation as they are.
    pub fn to_se3(&self) -> SE3 {
        SE3 {
            rotation: self.rotation,
            translation: self.translation,
        }
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn compose(&self, other: &Sim3) -> Sim3 {
        Sim3 {
            rotation: renormalize(self.rotation * other.rotation),
            translation: self.rotation * other.translation * self.scale + self.translation,
            scale: self.scale * other.scale,
        }
    }

    pub fn inverse(&self) -> Sim3 {
        let r_inv = self.rotation.inverse();
        let s_inv = 1.0 / self.scale;
        Sim3 {
            rotation: r_inv,
            translation: -(r_inv * self.translation) * s_inv,
            scale: s_inv,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p * self.scale + self.translation
    }

    pub fn exp(t: &Tangent7) -> Sim3 {
        let omega = t.omega();
        let sigma = t.sigma();
        Sim3 {
            rotation: so3_exp(&omega),
            translation: translation_matrix(&omega, sigma) * t.nu(),
            scale: sigma.exp(),
        }
    }

    pub fn log(&self) -> Result<Tangent7, GeomError> {
        let omega = so3_log(&self.rotation)?;
        let sigma = self.scale.ln();
        let v = translation_matrix(&omega, sigma);
        let nu = v
            .lu()
            .solve(&self.translation)
            .ok_or(GeomError::Singular)?;
        Ok(Tangent7::new(omega, nu, sigma))
    }

    pub fn approx_eq(&self, other: &Sim3, tol: f64) -> bool {
        self.rotation.angle_to(&other.rotation) <= tol
            && (self.translation - other.translation).norm() <= tol
            && (self.scale - other.scale).abs() <= tol
    }
}

impl fmt::Display for Sim3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = self.rotation;
        let t = self.translation;
        write!(
            f,
            "Sim3(t: [{:.4}, {:.4}, {:.4}], q: [{:.4}, {:.4}, {:.4}, {:.4}], s: {:.6})",
            t.x, t.y, t.z, q.i, q.j, q.k, q.w, self.scale
        )
    }
}

/// Serialized form shared by both transform types: quaternion as `[x, y, z, w]`.
#[derive(Serialize, Deserialize)]
struct PoseRepr {
    q: [f64; 4],
    t: [f64; 3],
    #[serde(default = "unit_scale", skip_serializing_if = "is_unit_scale")]
    s: f64,
}

fn unit_scale() -> f64 {
    1.0
}

fn is_unit_scale(s: &f64) -> bool {
    *s == 1.0
}

impl PoseRepr {
    fn rotation(&self) -> Result<UnitQuaternion<f64>, GeomError> {
        let q = Quaternion::new(self.q[3], self.q[0], self.q[1], self.q[2]);
        if !(q.norm() > 1e-6) {
            return Err(GeomError::InvalidQuaternion);
        }
        Ok(UnitQuaternion::new_normalize(q))
    }
}

impl From<SE3> for PoseRepr {
    fn from(p: SE3) -> Self {
        let q = p.rotation;
        PoseRepr {
            q: [q.i, q.j, q.k, q.w],
            t: [p.translation.x, p.translation.y, p.translation.z],
            s: 1.0,
        }
    }
}

impl From<Sim3> for PoseRepr {
    fn from(p: Sim3) -> Self {
        let q = p.rotation;
        PoseRepr {
            q: [q.i, q.j, q.k, q.w],
            t: [p.translation.x, p.translation.y, p.translation.z],
            s: p.scale,
        }
    }
}

impl TryFrom<PoseRepr> for SE3 {
    type Error = GeomError;
    fn try_from(r: PoseRepr) -> Result<Self, Self::Error> {
        Ok(SE3::new(r.rotation()?, Vector3::from(r.t)))
    }
}

impl TryFrom<PoseRepr> for Sim3 {
    type Error = GeomError;
    fn try_from(r: PoseRepr) -> Result<Self, Self::Error> {
        Sim3::new(r.rotation()?, Vector3::from(r.t), r.s)
    }
}
