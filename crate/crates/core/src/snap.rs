//! Arched trajectory from a ghost to its default pose, the release corridor
//! around it, snapping, and redefining the default.

use crate::config::Config;
use crate::ghost::{GhostError, GhostObject, GhostPhase};
use crate::math::Vec3;
use crate::scene::Scene;

const COARSE_SAMPLES: usize = 256;
const REFINE_ITERATIONS: usize = 20;

/// Quadratic Bézier from `start` to `end` whose control point is the chord
/// midpoint lifted along up.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArcTrajectory {
    pub start: Vec3,
    pub end: Vec3,
    pub apex_height: f64,
    pub control: Vec3,
}

impl ArcTrajectory {
    pub fn new(start: Vec3, end: Vec3, up: &Vec3, min_apex: f64, apex_ratio: f64) -> Self {
        let apex_height = min_apex.max(apex_ratio * (end - start).norm());
        let control = (start + end) / 2.0 + up * apex_height;
        Self { start, end, apex_height, control }
    }

    pub fn with_config(start: Vec3, end: Vec3, up: &Vec3, config: &Config) -> Self {
        Self::new(start, end, up, config.arc_min_apex, config.arc_apex_ratio)
    }

    pub fn point(&self, t: f64) -> Vec3 {
        if t <= 0.0 {
            return self.start;
        }
        if t >= 1.0 {
            return self.end;
        }
        let u = 1.0 - t;
        self.start * (u * u) + self.control * (2.0 * u * t) + self.end * (t * t)
    }

    /// `n ≥ 2` samples at uniform parameter spacing, endpoints exact.
    pub fn polyline(&self, n: usize) -> Vec<Vec3> {
        assert!(n >= 2, "polyline needs at least two samples");
        (0..n).map(|i| self.point(i as f64 / (n - 1) as f64)).collect()
    }

    /// Closest parameter and distance: coarse sampling, then ternary
    /// refinement inside the bracket around every coarse local minimum.
    /// Ties go to the smaller parameter.
    pub fn distance_to(&self, p: &Vec3) -> (f64, f64) {
        let dist = |t: f64| (self.point(t) - p).norm();
        let last = COARSE_SAMPLES - 1;
        let coarse: Vec<f64> = (0..COARSE_SAMPLES).map(|i| dist(i as f64 / last as f64)).collect();
        let mut best = (0.0, f64::INFINITY);
        for i in 0..COARSE_SAMPLES {
            let left = i == 0 || coarse[i] <= coarse[i - 1];
            let right = i == last || coarse[i] <= coarse[i + 1];
            if !(left && right) {
                continue;
            }
            let mut lo = i.saturating_sub(1) as f64 / last as f64;
            let mut hi = (i + 1).min(last) as f64 / last as f64;
            for _ in 0..REFINE_ITERATIONS {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if dist(m1) <= dist(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            for t in [lo, 0.5 * (lo + hi), hi] {
                let d = dist(t);
                if d < best.1 {
                    best = (t, d);
                }
            }
        }
        best
    }
}

pub fn trajectory_polyline(arc: &ArcTrajectory, n: usize) -> Vec<Vec3> {
    arc.polyline(n)
}

pub fn distance_to_arc(point: &Vec3, arc: &ArcTrajectory) -> (f64, f64) {
    arc.distance_to(point)
}

pub fn should_snap(ghost_center: &Vec3, arc: &ArcTrajectory, corridor_radius: f64) -> bool {
    arc.distance_to(ghost_center).1 <= corridor_radius
}

/// Moves the ghost onto its object's default pose, orientation included.
pub fn snap(ghost: &mut GhostObject, scene: &Scene) -> Result<(), GhostError> {
    let object = scene
        .object(&ghost.object_id)
        .ok_or_else(|| GhostError::UnknownObject(ghost.object_id.clone()))?;
    ghost.pose = object.default_pose;
    ghost.phase = GhostPhase::Placed;
    Ok(())
}

/// Stores a placed ghost's pose as its object's new default.
pub fn set_default(ghost: &GhostObject, scene: &mut Scene) -> Result<(), GhostError> {
    if ghost.phase != GhostPhase::Placed {
        return Err(GhostError::NotPlaced(ghost.object_id.clone()));
    }
    let object = scene
        .object_mut(&ghost.object_id)
        .ok_or_else(|| GhostError::UnknownObject(ghost.object_id.clone()))?;
    object.default_pose = ghost.pose;
    Ok(())
}
