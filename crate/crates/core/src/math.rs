//! Vectors, quaternions, the 6D rotation encoding and 3x3 principal-axis fits.
//!
//! Quaternions are scalar-first `(w, x, y, z)` everywhere. Angular quantities
//! are radians.

use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmath;

/// Row-major 3x3 matrix, `m[row][col]`.
pub type Mat3 = [[f64; 3]; 3];

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        fmath::sqrt(self.norm_squared())
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction, or `None` for (near) zero input.
    pub fn try_normalize(self, eps: f64) -> Option<Vec3> {
        let n = self.norm();
        if n > eps {
            Some(self / n)
        } else {
            None
        }
    }

    pub fn lerp(self, o: Vec3, t: f64) -> Vec3 {
        self + (o - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn component_mul(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

pub fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    Vec3::new(
        m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
        m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
        m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
    )
}

pub fn mat_from_columns(c0: Vec3, c1: Vec3, c2: Vec3) -> Mat3 {
    [[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]]
}

/// General (not necessarily unit) quaternion, scalar first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    pub fn from_scalar_vector(w: f64, v: Vec3) -> Self {
        Quat::new(w, v.x, v.y, v.z)
    }

    pub fn vector(self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn dot(self, o: Quat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        fmath::sqrt(self.dot(self))
    }

    pub fn conjugate(self) -> Quat {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }
}

impl Add for Quat {
    type Output = Quat;
    fn add(self, o: Quat) -> Quat {
        Quat::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Mul<f64> for Quat {
    type Output = Quat;
    fn mul(self, s: f64) -> Quat {
        Quat::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }
}

/// Hamilton product.
impl Mul for Quat {
    type Output = Quat;
    fn mul(self, o: Quat) -> Quat {
        Quat::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
}

/// Minimum norm accepted by [`UnitQuat::normalize`].
pub const MIN_QUAT_NORM: f64 = 1e-12;

/// Rotation quaternion. Holds `‖q‖ = 1` up to rounding; `q` and `-q` are the
/// same rotation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct UnitQuat(Quat);

impl TryFrom<[f64; 4]> for UnitQuat {
    type Error = Error;
    fn try_from(a: [f64; 4]) -> Result<Self> {
        UnitQuat::from_stored(Quat::new(a[0], a[1], a[2], a[3]))
    }
}

impl From<UnitQuat> for [f64; 4] {
    fn from(q: UnitQuat) -> Self {
        q.0.to_array()
    }
}

impl Default for UnitQuat {
    fn default() -> Self {
        UnitQuat::IDENTITY
    }
}

impl UnitQuat {
    pub const IDENTITY: UnitQuat = UnitQuat(Quat::new(1.0, 0.0, 0.0, 0.0));

    pub fn normalize(q: Quat) -> Result<UnitQuat> {
        let n = q.norm();
        if !(n > MIN_QUAT_NORM) || !n.is_finite() {
            return Err(Error::DegenerateQuaternion { norm: n });
        }
        Ok(UnitQuat(q * (1.0 / n)))
    }

    /// Accepts `q` unchanged when its norm is within `1e-12` of one, so
    /// stored unit quaternions load bit-exactly; normalizes otherwise.
    pub fn from_stored(q: Quat) -> Result<UnitQuat> {
        if (q.norm() - 1.0).abs() <= 1e-12 {
            return Ok(UnitQuat(q));
        }
        UnitQuat::normalize(q)
    }

    /// Wraps `q` without normalizing. Callers guarantee unit norm.
    pub(crate) const fn new_unchecked(q: Quat) -> UnitQuat {
        UnitQuat(q)
    }

    pub fn quat(self) -> Quat {
        self.0
    }

    pub fn w(self) -> f64 {
        self.0.w
    }
    pub fn x(self) -> f64 {
        self.0.x
    }
    pub fn y(self) -> f64 {
        self.0.y
    }
    pub fn z(self) -> f64 {
        self.0.z
    }

    pub fn to_array(self) -> [f64; 4] {
        self.0.to_array()
    }

    pub fn inverse(self) -> UnitQuat {
        UnitQuat(self.0.conjugate())
    }

    pub fn negated(self) -> UnitQuat {
        UnitQuat(self.0 * -1.0)
    }

    /// Representative with `w >= 0`.
    pub fn canonical(self) -> UnitQuat {
        if self.0.w < 0.0 {
            self.negated()
        } else {
            self
        }
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> UnitQuat {
        let Some(a) = axis.try_normalize(0.0) else {
            return UnitQuat::IDENTITY;
        };
        let (s, c) = (fmath::sin(0.5 * angle), fmath::cos(0.5 * angle));
        UnitQuat(Quat::from_scalar_vector(c, a * s))
    }

    /// Exponential map: rotation of `‖r‖` radians about `r`.
    pub fn from_rotvec(r: Vec3) -> UnitQuat {
        let theta = r.norm();
        if theta < 1e-12 {
            let q = Quat::from_scalar_vector(1.0, r * 0.5);
            return UnitQuat(q * (1.0 / q.norm()));
        }
        UnitQuat::from_axis_angle(r, theta)
    }

    /// Logarithm map on the shortest-path representative, `‖r‖ <= π`.
    pub fn to_rotvec(self) -> Vec3 {
        let q = self.canonical().0;
        let v = q.vector();
        let s = v.norm();
        if s < 1e-12 {
            return v * (2.0 / q.w);
        }
        let angle = 2.0 * fmath::atan2(s, q.w);
        v * (angle / s)
    }

    /// Intrinsic Z-Y-X composition: yaw about z, then pitch about the new y,
    /// then roll about the newest x.
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> UnitQuat {
        let (sr, cr) = (fmath::sin(0.5 * roll), fmath::cos(0.5 * roll));
        let (sp, cp) = (fmath::sin(0.5 * pitch), fmath::cos(0.5 * pitch));
        let (sy, cy) = (fmath::sin(0.5 * yaw), fmath::cos(0.5 * yaw));
        UnitQuat(Quat::new(
            cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
        ))
    }

    /// Inverse of [`UnitQuat::from_euler`], returned as `(roll, pitch, yaw)`.
    pub fn to_euler(self) -> (f64, f64, f64) {
        let m = self.to_matrix();
        let pitch = fmath::asin((-m[2][0]).clamp(-1.0, 1.0));
        let roll = fmath::atan2(m[2][1], m[2][2]);
        let yaw = fmath::atan2(m[1][0], m[0][0]);
        (roll, pitch, yaw)
    }

    pub fn to_matrix(self) -> Mat3 {
        let Quat { w, x, y, z } = self.0;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    /// Shepperd's method; `m` must be a proper rotation.
    pub fn from_matrix(m: &Mat3) -> UnitQuat {
        let tr = m[0][0] + m[1][1] + m[2][2];
        let q = if tr > 0.0 {
            let s = fmath::sqrt(tr + 1.0) * 2.0;
            Quat::new(
                0.25 * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            )
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = fmath::sqrt(1.0 + m[0][0] - m[1][1] - m[2][2]) * 2.0;
            Quat::new(
                (m[2][1] - m[1][2]) / s,
                0.25 * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            )
        } else if m[1][1] > m[2][2] {
            let s = fmath::sqrt(1.0 + m[1][1] - m[0][0] - m[2][2]) * 2.0;
            Quat::new(
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                0.25 * s,
                (m[1][2] + m[2][1]) / s,
            )
        } else {
            let s = fmath::sqrt(1.0 + m[2][2] - m[0][0] - m[1][1]) * 2.0;
            Quat::new(
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                0.25 * s,
            )
        };
        UnitQuat(q * (1.0 / q.norm()))
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        let q = self.0;
        let u = q.vector();
        let t = u.cross(v) * 2.0;
        v + t * q.w + u.cross(t)
    }

    /// Geodesic angle between two rotations, in `[0, π]`.
    pub fn angle_to(self, other: UnitQuat) -> f64 {
        (self.inverse() * other).to_rotvec().norm()
    }

    pub fn slerp(self, other: UnitQuat, t: f64) -> UnitQuat {
        let mut b = other.0;
        let mut d = self.0.dot(b);
        if d < 0.0 {
            b = b * -1.0;
            d = -d;
        }
        if d > 1.0 - 1e-12 {
            let q = self.0 * (1.0 - t) + b * t;
            return UnitQuat(q * (1.0 / q.norm()));
        }
        let theta = fmath::acos(d.min(1.0));
        let s = fmath::sin(theta);
        let wa = fmath::sin((1.0 - t) * theta) / s;
        let wb = fmath::sin(t * theta) / s;
        let q = self.0 * wa + b * wb;
        UnitQuat(q * (1.0 / q.norm()))
    }

    /// Signed angle of the twist component about `axis` (swing-twist split
    /// `q = swing * twist`). `axis` need not be unit.
    pub fn twist_angle(self, axis: Vec3) -> f64 {
        let Some(a) = axis.try_normalize(0.0) else {
            return 0.0;
        };
        let q = self.canonical().0;
        let proj = q.vector().dot(a);
        2.0 * fmath::atan2(proj, q.w)
    }

    pub fn to_6d(self) -> Rot6D {
        quat_to_6d(self)
    }
}

impl Mul for UnitQuat {
    type Output = UnitQuat;
    fn mul(self, o: UnitQuat) -> UnitQuat {
        UnitQuat(self.0 * o.0)
    }
}

/// Scales `q` to unit norm.
pub fn quat_normalize(q: [f64; 4]) -> Result<UnitQuat> {
    UnitQuat::normalize(Quat::new(q[0], q[1], q[2], q[3]))
}

/// First two rotation-matrix columns, column-major:
/// `[m00, m10, m20, m01, m11, m21]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rot6D(pub [f64; 6]);

pub fn quat_to_6d(q: UnitQuat) -> Rot6D {
    let m = q.to_matrix();
    Rot6D([m[0][0], m[1][0], m[2][0], m[0][1], m[1][1], m[2][1]])
}

/// Gram-Schmidt reconstruction of the rotation encoded by `r`.
pub fn sixd_to_quat(r: Rot6D) -> Result<UnitQuat> {
    let a1 = Vec3::new(r.0[0], r.0[1], r.0[2]);
    let a2 = Vec3::new(r.0[3], r.0[4], r.0[5]);
    let b1 = a1.try_normalize(1e-12).ok_or(Error::DegenerateRotation)?;
    let u2 = a2 - b1 * b1.dot(a2);
    let a2n = a2.norm();
    if !(a2n > 1e-12) || u2.norm() <= 1e-9 * a2n {
        return Err(Error::DegenerateRotation);
    }
    let b2 = u2 / u2.norm();
    let b3 = b1.cross(b2);
    Ok(UnitQuat::from_matrix(&mat_from_columns(b1, b2, b3)))
}

impl Rot6D {
    pub fn to_quat(self) -> Result<UnitQuat> {
        sixd_to_quat(self)
    }
}

/// Rotation vector `r` with `exp(r) * current = target`, `‖r‖ <= π`.
pub fn quat_error_rotvec(target: UnitQuat, current: UnitQuat) -> Vec3 {
    (target * current.inverse()).to_rotvec()
}

pub fn quat_from_euler(roll: f64, pitch: f64, yaw: f64) -> UnitQuat {
    UnitQuat::from_euler(roll, pitch, yaw)
}

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the matrix whose columns are the eigenvectors.
pub fn symmetric_eigen(mut a: Mat3) -> ([f64; 3], Mat3) {
    let mut v: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if off == 0.0 || off <= JACOBI_TOL * JACOBI_TOL * (diag + 2.0 * off) {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
            let t = sign / (fmath::abs(theta) + fmath::sqrt(theta * theta + 1.0));
            let c = 1.0 / fmath::sqrt(t * t + 1.0);
            let s = t * c;
            for row in a.iter_mut() {
                let (akp, akq) = (row[p], row[q]);
                row[p] = c * akp - s * akq;
                row[q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let (vkp, vkq) = (row[p], row[q]);
                row[p] = c * vkp - s * vkq;
                row[q] = s * vkp + c * vkq;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrincipalAxis {
    /// Dominant direction, sign fixed so its largest-magnitude component is positive.
    pub axis: Vec3,
    pub centroid: Vec3,
    /// RMS perpendicular distance of the points to the line `(centroid, axis)`.
    pub residual_rms: f64,
}

/// Spread (trace of the covariance) below which points count as coincident.
const ZERO_SPREAD: f64 = 1e-24;

/// Dominant principal axis of a point set and the RMS distance of the points
/// from it.
pub fn principal_axis(points: &[Vec3]) -> Result<PrincipalAxis> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints {
            required: 2,
            found: points.len(),
        });
    }
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vec3::ZERO, |acc, &p| acc + p) / n;
    let mut cov = [[0.0; 3]; 3];
    for &p in points {
        let d = (p - centroid).to_array();
        for r in 0..3 {
            for c in 0..3 {
                cov[r][c] += d[r] * d[c];
            }
        }
    }
    for row in cov.iter_mut() {
        for x in row.iter_mut() {
            *x /= n;
        }
    }
    if cov[0][0] + cov[1][1] + cov[2][2] <= ZERO_SPREAD {
        return Err(Error::ZeroSpread);
    }
    let (vals, vecs) = symmetric_eigen(cov);
    let mut best = 0;
    for k in 1..3 {
        if vals[k] > vals[best] {
            best = k;
        }
    }
    let mut axis = Vec3::new(vecs[0][best], vecs[1][best], vecs[2][best]);
    axis = axis / axis.norm();
    let comps = axis.to_array();
    let mut big = 0;
    for k in 1..3 {
        if fmath::abs(comps[k]) > fmath::abs(comps[big]) {
            big = k;
        }
    }
    if comps[big] < 0.0 {
        axis = -axis;
    }
    let sq: f64 = points
        .iter()
        .map(|&p| {
            let d = p - centroid;
            (d - axis * d.dot(axis)).norm_squared()
        })
        .sum();
    Ok(PrincipalAxis {
        axis,
        centroid,
        residual_rms: fmath::sqrt(sq / n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_2, PI};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn random_unit(rng: &mut ChaCha8Rng) -> UnitQuat {
        loop {
            let q = Quat::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if q.norm() > 0.1 && q.norm() <= 1.0 {
                return UnitQuat::normalize(q).unwrap();
            }
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(quat_normalize([2.0, 0.0, 0.0, 0.0]).unwrap().to_array(), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(quat_normalize([0.0, 3.0, 0.0, 0.0]).unwrap().to_array(), [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(quat_normalize([1.0, 1.0, 1.0, 1.0]).unwrap().to_array(), [0.5; 4]);
        assert!(matches!(
            quat_normalize([0.0, 1e-13, 0.0, 0.0]),
            Err(Error::DegenerateQuaternion { .. })
        ));
    }

    #[test]
    fn six_d_examples() {
        assert_eq!(quat_to_6d(UnitQuat::IDENTITY).0, [1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let rz = UnitQuat::from_axis_angle(Vec3::Z, PI);
        let r = quat_to_6d(rz).0;
        let expect = [-1.0, 0.0, 0.0, 0.0, -1.0, 0.0];
        for k in 0..6 {
            assert!(close(r[k], expect[k], 1e-15), "{r:?}");
        }
        let id = sixd_to_quat(Rot6D([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])).unwrap();
        assert_eq!(id.to_array(), [1.0, 0.0, 0.0, 0.0]);
        let scaled = sixd_to_quat(Rot6D([2.0, 0.0, 0.0, 0.0, 5.0, 0.0])).unwrap();
        assert_eq!(scaled.to_array(), [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn six_d_degenerate_columns() {
        assert_eq!(
            sixd_to_quat(Rot6D([0.0, 0.0, 0.0, 0.0, 1.0, 0.0])),
            Err(Error::DegenerateRotation)
        );
        assert_eq!(
            sixd_to_quat(Rot6D([1.0, 0.0, 0.0, 3.0, 0.0, 0.0])),
            Err(Error::DegenerateRotation)
        );
    }

    #[test]
    fn six_d_round_trip_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let q = random_unit(&mut rng);
            let back = sixd_to_quat(quat_to_6d(q)).unwrap();
            assert!(q.angle_to(back) < 1e-9);
            let det = {
                let m = back.to_matrix();
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            };
            assert!(close(det, 1.0, 1e-9));
        }
    }

    #[test]
    fn euler_examples() {
        assert_eq!(quat_from_euler(0.0, 0.0, 0.0).to_array(), [1.0, 0.0, 0.0, 0.0]);
        let q = quat_from_euler(0.0, 0.0, PI).to_array();
        for (a, b) in q.iter().zip([0.0, 0.0, 0.0, 1.0]) {
            assert!(close(*a, b, 1e-15));
        }
        let q = quat_from_euler(FRAC_PI_2, 0.0, 0.0).to_array();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        for (a, b) in q.iter().zip([h, h, 0.0, 0.0]) {
            assert!(close(*a, b, 1e-15));
        }
    }

    #[test]
    fn euler_is_intrinsic_zyx() {
        let (r, p, y) = (0.3, -0.4, 1.1);
        let composed = UnitQuat::from_axis_angle(Vec3::Z, y)
            * UnitQuat::from_axis_angle(Vec3::Y, p)
            * UnitQuat::from_axis_angle(Vec3::X, r);
        assert!(quat_from_euler(r, p, y).angle_to(composed) < 1e-14);
        let (r2, p2, y2) = quat_from_euler(r, p, y).to_euler();
        assert!(close(r, r2, 1e-12) && close(p, p2, 1e-12) && close(y, y2, 1e-12));
    }

    #[test]
    fn error_rotvec_examples() {
        let q = quat_from_euler(0.2, 0.1, -0.7);
        assert!(quat_error_rotvec(q, q).norm() < 1e-15);
        let target = UnitQuat::from_axis_angle(Vec3::Z, FRAC_PI_2);
        let r = quat_error_rotvec(target, UnitQuat::IDENTITY);
        assert!(close(r.x, 0.0, 1e-15) && close(r.y, 0.0, 1e-15) && close(r.z, FRAC_PI_2, 1e-15));
    }

    #[test]
    fn error_rotvec_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let a = random_unit(&mut rng);
            let b = random_unit(&mut rng);
            let r = quat_error_rotvec(a, b);
            assert!(r.norm() <= PI + 1e-12);
            let rebuilt = UnitQuat::from_rotvec(r) * b;
            assert!(rebuilt.angle_to(a) < 1e-9);
        }
    }

    #[test]
    fn twist_recovers_tilt_under_orthogonal_swing() {
        let t = Vec3::new(0.6, 0.8, 0.0);
        let q = UnitQuat::from_axis_angle(Vec3::Z, 0.9) * UnitQuat::from_axis_angle(t, -0.37);
        assert!(close(q.twist_angle(t), -0.37, 1e-14));
    }

    #[test]
    fn principal_axis_collinear() {
        let pts = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)];
        let pa = principal_axis(&pts).unwrap();
        assert_eq!(pa.axis, Vec3::X);
        assert_eq!(pa.residual_rms, 0.0);
    }

    #[test]
    fn principal_axis_planar_square() {
        let pts = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
        ];
        let pa = principal_axis(&pts).unwrap();
        assert!(pa.residual_rms > 0.0);
        assert!(pa.axis.z.abs() < 1e-12);
    }

    #[test]
    fn principal_axis_errors() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(principal_axis(&[p, p, p]), Err(Error::ZeroSpread));
        assert!(matches!(principal_axis(&[p]), Err(Error::TooFewPoints { .. })));
    }

    /// Brute-force best-fit line: scan directions on a fine hemisphere grid
    /// (the optimal line for a fixed direction passes through the centroid),
    /// then refine around the best cell.
    fn grid_line_fit_rms(points: &[Vec3]) -> f64 {
        let n = points.len() as f64;
        let c = points.iter().fold(Vec3::ZERO, |a, &p| a + p) / n;
        let rms = |dir: Vec3| -> f64 {
            let s: f64 = points
                .iter()
                .map(|&p| {
                    let d = p - c;
                    (d - dir * d.dot(dir)).norm_squared()
                })
                .sum();
            (s / n).sqrt()
        };
        let dir_of = |th: f64, ph: f64| Vec3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos());
        let (mut best, mut bt, mut bp) = (f64::INFINITY, 0.0, 0.0);
        let steps = 360;
        for i in 0..=steps / 2 {
            for j in 0..steps {
                let th = PI * i as f64 / steps as f64;
                let ph = 2.0 * PI * j as f64 / steps as f64;
                let r = rms(dir_of(th, ph));
                if r < best {
                    (best, bt, bp) = (r, th, ph);
                }
            }
        }
        let mut span = 2.0 * PI / steps as f64;
        for _ in 0..30 {
            let (ct, cp) = (bt, bp);
            for i in -10..=10 {
                for j in -10..=10 {
                    let th = ct + span * i as f64 / 10.0;
                    let ph = cp + span * j as f64 / 10.0;
                    let r = rms(dir_of(th, ph));
                    if r < best {
                        (best, bt, bp) = (r, th, ph);
                    }
                }
            }
            span *= 0.3;
        }
        best
    }

    #[test]
    fn principal_axis_matches_grid_search_on_l_corner() {
        let mut pts = alloc::vec::Vec::new();
        for k in 0..5 {
            pts.push(Vec3::new(0.04 - 0.01 * k as f64, 0.0, 0.1));
        }
        for k in 1..5 {
            pts.push(Vec3::new(0.0, 0.01 * k as f64, 0.1));
        }
        let pa = principal_axis(&pts).unwrap();
        let oracle = grid_line_fit_rms(&pts);
        assert!((pa.residual_rms - oracle).abs() < 1e-3, "{} vs {}", pa.residual_rms, oracle);
        assert!(pa.residual_rms > 1e-3);
    }

    proptest! {
        #[test]
        fn normalize_is_identity_on_unit(w in -1.0f64..1.0, x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
            let raw = Quat::new(w, x, y, z);
            prop_assume!(raw.norm() > 1e-3);
            let q = UnitQuat::normalize(raw).unwrap();
            let again = quat_normalize(q.to_array()).unwrap();
            let d = Quat::new(again.w() - q.w(), again.x() - q.x(), again.y() - q.y(), again.z() - q.z());
            prop_assert!(d.norm() < 1e-12);
        }

        #[test]
        fn principal_axis_rigid_invariance(
            seed in 0u64..1000,
            yaw in -3.0f64..3.0,
            roll in -3.0f64..3.0,
            tx in -2.0f64..2.0,
            ty in -2.0f64..2.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: alloc::vec::Vec<Vec3> = (0..9)
                .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-0.2..0.2), rng.gen_range(-0.1..0.1)))
                .collect();
            let rot = quat_from_euler(roll, 0.3, yaw);
            let moved: alloc::vec::Vec<Vec3> = pts.iter().map(|&p| rot.rotate(p) + Vec3::new(tx, ty, 0.5)).collect();
            let a = principal_axis(&pts).unwrap().residual_rms;
            let b = principal_axis(&moved).unwrap().residual_rms;
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn principal_axis_collinear_has_zero_residual(
            dx in -1.0f64..1.0, dy in -1.0f64..1.0, dz in -1.0f64..1.0,
            ox in -5.0f64..5.0,
        ) {
            let d = Vec3::new(dx, dy, dz);
            prop_assume!(d.norm() > 1e-2);
            let pts: alloc::vec::Vec<Vec3> = (0..7).map(|k| Vec3::new(ox, 1.0, -2.0) + d * (k as f64 * 0.3)).collect();
            prop_assert!(principal_axis(&pts).unwrap().residual_rms < 1e-12);
        }
    }
}
