//! Ray queries against oriented boxes and lasso-volume containment.
//!
//! A lasso volume is the generalized cone from the controller (the apex)
//! through a closed boundary drawn on scene surfaces, capped at depth
//! `t_max`. Containment of a direction is decided on the unit sphere by the
//! winding number of the boundary directions, so boundaries spanning several
//! non-coplanar surfaces need no common plane.

use std::f64::consts::TAU;

use crate::math::{BoxShape, Pose, Vec3, WorldBox, UNIT_TOLERANCE};
use crate::scene::Scene;

/// Entries within this distance count as simultaneous.
pub const TIE_TOLERANCE: f64 = 1e-9;
/// Boundary points closer than this are considered duplicates.
pub const MIN_BOUNDARY_SEPARATION: f64 = 1e-6;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GeometryError {
    #[error("ray direction must be unit length (|d| = {0})")]
    NonUnitDirection(f64),
    #[error("lasso boundary needs at least 3 points, got {0}")]
    TooFewBoundaryPoints(usize),
    #[error("lasso boundary points {0} and {1} coincide")]
    DuplicateBoundaryPoint(usize, usize),
    #[error("lasso boundary point {0} coincides with the apex")]
    BoundaryAtApex(usize),
    #[error("lasso depth cap must be positive")]
    InvalidDepth,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self, GeometryError> {
        let n = direction.norm();
        if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(GeometryError::NonUnitDirection(n));
        }
        Ok(Self { origin, direction })
    }

    /// Ray along a controller's pointing direction.
    pub fn from_pose(pose: &Pose) -> Self {
        Self { origin: pose.position, direction: pose.forward().normalize() }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum TargetKind {
    Object,
    Anchor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceHit {
    pub target_id: String,
    pub kind: TargetKind,
    pub t: f64,
    pub point: Vec3,
}

/// Slab test against a world box: `(t_enter, t_exit)` clipped to `t ≥ 0`.
pub fn ray_world_box(ray: &Ray, b: &WorldBox) -> Option<(f64, f64)> {
    let rel = ray.origin - b.center;
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for k in 0..3 {
        let o = b.axes[k].dot(&rel);
        let d = b.axes[k].dot(&ray.direction);
        let h = b.half[k];
        if d.abs() < 1e-15 {
            if o.abs() > h {
                return None;
            }
            continue;
        }
        let (mut t0, mut t1) = ((-h - o) / d, (h - o) / d);
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_enter = t_enter.max(t0);
        t_exit = t_exit.min(t1);
        if t_enter > t_exit {
            return None;
        }
    }
    if t_exit < 0.0 {
        return None;
    }
    Some((t_enter.max(0.0), t_exit))
}

pub fn ray_box_intersect(ray: &Ray, pose: &Pose, shape: &BoxShape) -> Option<(f64, f64)> {
    ray_world_box(ray, &WorldBox::new(pose, shape))
}

/// All scene targets with their boxes, objects first.
fn targets(scene: &Scene) -> impl Iterator<Item = (&str, TargetKind, WorldBox)> {
    scene
        .objects
        .iter()
        .map(|o| (o.id.as_str(), TargetKind::Object, o.world_box()))
        .chain(scene.anchors.iter().map(|a| (a.id.as_str(), TargetKind::Anchor, a.world_box())))
}

/// Nearest entry among `(id, kind, t)` candidates: minimal `t`, then objects
/// before anchors for entries within [`TIE_TOLERANCE`], then smallest id.
pub fn nearest<'a, I>(candidates: I) -> Option<(&'a str, TargetKind, f64)>
where
    I: IntoIterator<Item = (&'a str, TargetKind, f64)>,
{
    let all: Vec<_> = candidates.into_iter().collect();
    let t_min = all.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
    all.into_iter()
        .filter(|c| c.2 - t_min <= TIE_TOLERANCE)
        .min_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(b.0)).then_with(|| a.2.total_cmp(&b.2)))
}

fn hit_from(ray: &Ray, found: Option<(&str, TargetKind, f64)>) -> Option<SurfaceHit> {
    found.map(|(id, kind, t)| SurfaceHit { target_id: id.to_string(), kind, t, point: ray.at(t) })
}

/// First object or anchor intersected by the ray.
pub fn first_hit(ray: &Ray, scene: &Scene) -> Option<SurfaceHit> {
    let found = nearest(targets(scene).filter_map(|(id, kind, b)| ray_world_box(ray, &b).map(|(t, _)| (id, kind, t))));
    hit_from(ray, found)
}

/// Entry point on the nearest surface ahead of the ray. Boxes containing the
/// ray origin have no entry surface ahead and are skipped.
pub fn surface_hit_point(ray: &Ray, scene: &Scene) -> Option<SurfaceHit> {
    let found = nearest(targets(scene).filter_map(|(id, kind, b)| {
        if b.contains(&ray.origin) {
            return None;
        }
        ray_world_box(ray, &b).map(|(t, _)| (id, kind, t))
    }));
    hit_from(ray, found)
}

/// Selection cone from `apex` through a closed boundary, capped at `t_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct LassoVolume {
    apex: Vec3,
    boundary: Vec<Vec3>,
    t_max: f64,
    directions: Vec<Vec3>,
    mean_direction: Vec3,
}

impl LassoVolume {
    pub fn new(apex: Vec3, boundary: Vec<Vec3>, t_max: f64) -> Result<Self, GeometryError> {
        if boundary.len() < 3 {
            return Err(GeometryError::TooFewBoundaryPoints(boundary.len()));
        }
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(GeometryError::InvalidDepth);
        }
        for i in 0..boundary.len() {
            for j in i + 1..boundary.len() {
                if (boundary[i] - boundary[j]).norm() <= MIN_BOUNDARY_SEPARATION {
                    return Err(GeometryError::DuplicateBoundaryPoint(i, j));
                }
            }
        }
        let mut directions = Vec::with_capacity(boundary.len());
        for (i, p) in boundary.iter().enumerate() {
            let v = p - apex;
            let n = v.norm();
            if n <= MIN_BOUNDARY_SEPARATION {
                return Err(GeometryError::BoundaryAtApex(i));
            }
            directions.push(v / n);
        }
        let sum: Vec3 = directions.iter().sum();
        let mean_direction = if sum.norm() > 0.0 { sum.normalize() } else { directions[0] };
        Ok(Self { apex, boundary, t_max, directions, mean_direction })
    }

    /// Depth cap of `factor` times the farthest boundary distance.
    pub fn with_depth_factor(apex: Vec3, boundary: Vec<Vec3>, factor: f64) -> Result<Self, GeometryError> {
        let farthest = boundary.iter().map(|p| (p - apex).norm()).fold(0.0, f64::max);
        Self::new(apex, boundary, factor * farthest)
    }

    pub fn apex(&self) -> &Vec3 {
        &self.apex
    }

    pub fn boundary(&self) -> &[Vec3] {
        &self.boundary
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// Winding number of the boundary directions around unit direction `q`.
    ///
    /// Each edge contributes the signed angle it sweeps as seen from `q`
    /// (measured in the tangent plane at `q`), which is the exact azimuth
    /// change along a great-circle arc not passing through `±q`.
    pub fn winding_number(&self, q: &Vec3) -> i64 {
        let n = self.directions.len();
        let mut total = 0.0;
        for i in 0..n {
            let a = &self.directions[i];
            let b = &self.directions[(i + 1) % n];
            let sin = q.dot(&a.cross(b));
            let cos = a.dot(b) - a.dot(q) * b.dot(q);
            total += sin.atan2(cos);
        }
        (total / TAU).round() as i64
    }

    /// Nonzero-rule containment. Directions facing away from the boundary's
    /// mean direction are outside, which fixes the inside of the spherical
    /// polygon as the side facing the drawn surfaces.
    pub fn contains(&self, point: &Vec3) -> bool {
        let v = point - self.apex;
        let dist = v.norm();
        if !(dist > 0.0 && dist <= self.t_max) {
            return false;
        }
        let q = v / dist;
        if q.dot(&self.mean_direction) <= 0.0 {
            return false;
        }
        self.winding_number(&q) != 0
    }
}

pub fn point_in_lasso(point: &Vec3, volume: &LassoVolume) -> bool {
    volume.contains(point)
}

/// The 8 world-space corners followed by the center.
pub fn probe_points(b: &WorldBox) -> [Vec3; 9] {
    let c = b.corners();
    [c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7], b.center]
}

/// A box overlaps the lasso when any of its 9 probe points is inside.
pub fn world_box_overlaps_lasso(b: &WorldBox, volume: &LassoVolume) -> bool {
    probe_points(b).iter().any(|p| volume.contains(p))
}

pub fn box_overlaps_lasso(pose: &Pose, shape: &BoxShape, volume: &LassoVolume) -> bool {
    world_box_overlaps_lasso(&WorldBox::new(pose, shape), volume)
}
