//! Poses, box shapes and oriented world-space boxes.

use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;

/// Maximum deviation of a stored quaternion from unit length.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Rigid pose: position in meters plus a unit orientation quaternion.
///
/// On disk the orientation is written `[w, x, y, z]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRepr {
    position: [f64; 3],
    orientation: [f64; 4],
}

impl From<PoseRepr> for Pose {
    fn from(r: PoseRepr) -> Self {
        let [w, x, y, z] = r.orientation;
        // Stored verbatim so that save/load is exact; `validate` checks the norm.
        Pose {
            position: Vec3::from(r.position),
            orientation: UnitQuaternion::new_unchecked(Quaternion::new(w, x, y, z)),
        }
    }
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        PoseRepr {
            position: [p.position.x, p.position.y, p.position.z],
            orientation: p.wxyz(),
        }
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(position: Vec3, orientation: UnitQuaternion<f64>) -> Self {
        Self { position, orientation }
    }

    pub fn identity() -> Self {
        Self::new(Vec3::zeros(), UnitQuaternion::identity())
    }

    pub fn from_translation(position: Vec3) -> Self {
        Self::new(position, UnitQuaternion::identity())
    }

    /// Builds a pose from raw `[x, y, z]` and `[w, x, y, z]` arrays without
    /// renormalizing the quaternion.
    pub fn from_arrays(position: [f64; 3], wxyz: [f64; 4]) -> Self {
        PoseRepr { position, orientation: wxyz }.into()
    }

    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.position.iter().all(|c| c.is_finite()) {
            return Err("position has a non-finite component".into());
        }
        let q = self.orientation.quaternion();
        if !q.coords.iter().all(|c| c.is_finite()) {
            return Err("orientation has a non-finite component".into());
        }
        let norm = q.norm();
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(format!("orientation is not unit length (|q| = {norm})"));
        }
        Ok(())
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self::new(iso.translation.vector, iso.rotation)
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::from_isometry(&(self.to_isometry() * other.to_isometry()))
    }

    pub fn inverse(&self) -> Pose {
        Pose::from_isometry(&self.to_isometry().inverse())
    }

    pub fn transform_point(&self, local: &Vec3) -> Vec3 {
        self.position + self.orientation * local
    }

    /// Pointing direction of a controller held at this pose (local +Z).
    pub fn forward(&self) -> Vec3 {
        self.orientation * Vec3::z()
    }

    /// Exact equality on every stored float.
    pub fn bit_eq(&self, other: &Pose) -> bool {
        self.position
            .iter()
            .chain(self.orientation.quaternion().coords.iter())
            .zip(other.position.iter().chain(other.orientation.quaternion().coords.iter()))
            .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub fn translation_distance(&self, other: &Pose) -> f64 {
        (self.position - other.position).norm()
    }

    pub fn rotation_angle_to(&self, other: &Pose) -> f64 {
        rotation_angle_between(&self.orientation, &other.orientation)
    }
}

/// Angle in radians of the relative rotation `a⁻¹ b`, in `[0, π]`.
///
/// Uses `atan2` so that tiny angles keep full relative precision.
pub fn rotation_angle_between(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let rel = a.inverse() * b;
    let q = rel.quaternion();
    2.0 * q.imag().norm().atan2(q.w.abs())
}

/// Linear position blend and spherical orientation blend, `s ∈ [0, 1]`.
pub fn interpolate_pose(from: &Pose, to: &Pose, s: f64) -> Pose {
    let position = from.position.lerp(&to.position, s);
    let orientation = from
        .orientation
        .try_slerp(&to.orientation, s, 1e-12)
        .unwrap_or(to.orientation);
    Pose::new(position, orientation)
}

/// Twist component of `q` about `up`, i.e. `q` with roll and pitch removed.
pub fn yaw_only(q: &UnitQuaternion<f64>, up: &Vec3) -> UnitQuaternion<f64> {
    let raw = q.quaternion();
    let along = up * raw.imag().dot(up);
    let twist = Quaternion::new(raw.w, along.x, along.y, along.z);
    if twist.norm() < 1e-12 {
        // Half-turn about a horizontal axis has no twist component.
        return UnitQuaternion::identity();
    }
    UnitQuaternion::from_quaternion(twist)
}

pub fn is_yaw_only(q: &UnitQuaternion<f64>, up: &Vec3) -> bool {
    let imag = q.quaternion().imag();
    (imag - up * imag.dot(up)).norm() <= 1e-12
}

/// Half extents of an object-local box, in meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxShape {
    pub half_extents: Vec3,
}

impl BoxShape {
    pub fn new(hx: f64, hy: f64, hz: f64) -> Self {
        Self { half_extents: Vec3::new(hx, hy, hz) }
    }

    pub fn cube(half: f64) -> Self {
        Self::new(half, half, half)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.half_extents.iter().all(|h| h.is_finite() && *h > 0.0) {
            Ok(())
        } else {
            Err("half_extents must all be positive".into())
        }
    }
}

/// Oriented box in world space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorldBox {
    pub center: Vec3,
    /// Unit box axes (columns of the rotation matrix).
    pub axes: [Vec3; 3],
    pub half: Vec3,
}

impl WorldBox {
    pub fn new(pose: &Pose, shape: &BoxShape) -> Self {
        let rot = pose.orientation.to_rotation_matrix();
        let m = rot.matrix();
        Self {
            center: pose.position,
            axes: [m.column(0).into(), m.column(1).into(), m.column(2).into()],
            half: shape.half_extents,
        }
    }

    /// Box of an object whose local height (Y) is scaled by `height_factor`
    /// with the bottom face held in place.
    pub fn with_height_factor(pose: &Pose, shape: &BoxShape, height_factor: f64) -> Self {
        let mut b = Self::new(pose, shape);
        if height_factor != 1.0 {
            let full = shape.half_extents.y;
            let scaled = full * height_factor;
            b.center -= b.axes[1] * (full - scaled);
            b.half.y = scaled;
        }
        b
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let mut out = [Vec3::zeros(); 8];
        for (i, c) in out.iter_mut().enumerate() {
            let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
            *c = self.center
                + self.axes[0] * (sx * self.half.x)
                + self.axes[1] * (sy * self.half.y)
                + self.axes[2] * (sz * self.half.z);
        }
        out
    }

    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        let d = p - self.center;
        Vec3::new(self.axes[0].dot(&d), self.axes[1].dot(&d), self.axes[2].dot(&d))
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let l = self.to_local(p);
        (0..3).all(|k| l[k].abs() <= self.half[k])
    }

    /// Half-width of the box projected onto `dir`.
    pub fn radius_along(&self, dir: &Vec3) -> f64 {
        (0..3).map(|k| self.axes[k].dot(dir).abs() * self.half[k]).sum()
    }

    pub fn bottom_along(&self, up: &Vec3) -> f64 {
        self.center.dot(up) - self.radius_along(up)
    }

    pub fn top_along(&self, up: &Vec3) -> f64 {
        self.center.dot(up) + self.radius_along(up)
    }

    /// Index of the box axis most aligned with `up`.
    pub fn vertical_axis(&self, up: &Vec3) -> usize {
        let mut best = 0;
        for k in 1..3 {
            if self.axes[k].dot(up).abs() > self.axes[best].dot(up).abs() {
                best = k;
            }
        }
        best
    }

    /// Whether `p`, dropped along `up`, lands within the box's horizontal
    /// footprint (tested on the two non-vertical box axes).
    pub fn footprint_contains(&self, p: &Vec3, up: &Vec3) -> bool {
        let v = self.vertical_axis(up);
        let l = self.to_local(p);
        (0..3).filter(|k| *k != v).all(|k| l[k].abs() <= self.half[k])
    }
}
