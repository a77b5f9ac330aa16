//! Quasi-static placement: released ghosts drop straight down onto the
//! highest support under their center, flattened to yaw-only orientation,
//! and are nudged sideways out of anything they would otherwise penetrate.

use crate::ghost::GhostObject;
use crate::math::{is_yaw_only, yaw_only, Pose, Vec3, WorldBox};
use crate::scene::Scene;

/// Largest tolerated overlap between resting boxes.
pub const PENETRATION_TOLERANCE: f64 = 1e-6;
/// Bottom face and support top must agree to this height.
pub const CONTACT_TOLERANCE: f64 = 1e-9;

const MAX_SETTLE_ITERATIONS: usize = 32;
const PUSH_MARGIN: f64 = 1e-7;
const DEGENERATE_AXIS: f64 = 1e-9;
const CLIMB_LIMIT: usize = 4;
const RING_STEP: f64 = 0.02;
const RING_COUNT: usize = 150;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PhysicsError {
    #[error("no support below `{0}` and no walkable anchor to fall back on")]
    NoSupport(String),
    #[error("could not find a non-penetrating rest pose for `{0}`")]
    PlacementRejected(String),
    #[error("ghost refers to unknown object `{0}`")]
    UnknownObject(String),
}

/// A box whose top face can carry other boxes.
#[derive(Clone, Debug)]
pub struct SupportSurface {
    pub id: String,
    pub world_box: WorldBox,
}

impl SupportSurface {
    pub fn new(id: &str, world_box: WorldBox) -> Self {
        Self { id: id.to_string(), world_box }
    }
}

/// Minimum translation distance separating two oriented boxes, from the 15
/// separating-axis candidates. Zero when the boxes are disjoint.
pub fn penetration_depth(a: &WorldBox, b: &WorldBox) -> f64 {
    let offset = b.center - a.center;
    let mut axes: Vec<Vec3> = Vec::with_capacity(15);
    axes.extend_from_slice(&a.axes);
    axes.extend_from_slice(&b.axes);
    for ea in &a.axes {
        for eb in &b.axes {
            let c = ea.cross(eb);
            let n = c.norm();
            if n > DEGENERATE_AXIS {
                axes.push(c / n);
            }
        }
    }
    let mut best = f64::INFINITY;
    for axis in &axes {
        let overlap = a.radius_along(axis) + b.radius_along(axis) - offset.dot(axis).abs();
        if overlap <= 0.0 {
            return 0.0;
        }
        best = best.min(overlap);
    }
    best
}

/// Bottom face on a support top (or the floor fallback height) with the box
/// center over that support's footprint.
pub fn is_resting(b: &WorldBox, supports: &[SupportSurface], fallback_top: Option<f64>, up: &Vec3) -> bool {
    let bottom = b.bottom_along(up);
    let on_support = supports.iter().any(|s| {
        (bottom - s.world_box.top_along(up)).abs() < CONTACT_TOLERANCE
            && s.world_box.footprint_contains(&b.center, up)
    });
    on_support || fallback_top.is_some_and(|t| (bottom - t).abs() < CONTACT_TOLERANCE)
}

#[derive(Clone, Debug)]
struct Obstacle {
    id: String,
    world_box: WorldBox,
    supports: bool,
}

/// Everything a released box can rest on or collide with.
#[derive(Clone, Debug)]
pub struct Environment {
    obstacles: Vec<Obstacle>,
    fallback_top: Option<f64>,
    up: Vec3,
}

impl Environment {
    /// Environment seen by `ghost`: all anchors, physical objects other than
    /// its own twin and twins represented in `others`, and the `others`
    /// ghosts at their ghost poses.
    pub fn for_ghost(ghost: &GhostObject, scene: &Scene, others: &[GhostObject]) -> Result<Self, PhysicsError> {
        Self::for_ghost_ignoring(ghost, scene, others, &[])
    }

    /// As [`Environment::for_ghost`], additionally dropping the physical
    /// objects named in `ignored` (twins of ghosts not yet placed).
    pub fn for_ghost_ignoring(
        ghost: &GhostObject,
        scene: &Scene,
        others: &[GhostObject],
        ignored: &[String],
    ) -> Result<Self, PhysicsError> {
        let mut obstacles: Vec<Obstacle> = scene
            .anchors
            .iter()
            .map(|a| Obstacle { id: a.id.clone(), world_box: a.world_box(), supports: a.walkable_top })
            .collect();
        for o in &scene.objects {
            if o.id == ghost.object_id || others.iter().any(|g| g.object_id == o.id) || ignored.contains(&o.id) {
                continue;
            }
            obstacles.push(Obstacle { id: o.id.clone(), world_box: o.world_box(), supports: true });
        }
        for g in others.iter().filter(|g| g.object_id != ghost.object_id) {
            let world_box = g.world_box(scene).ok_or_else(|| PhysicsError::UnknownObject(g.object_id.clone()))?;
            obstacles.push(Obstacle { id: format!("ghost:{}", g.object_id), world_box, supports: true });
        }
        Ok(Self::from_obstacles(obstacles, scene))
    }

    /// Environment for a physical object at a target pose: anchors plus the
    /// other objects at their current poses.
    pub fn for_object(object_id: &str, scene: &Scene) -> Self {
        let mut obstacles: Vec<Obstacle> = scene
            .anchors
            .iter()
            .map(|a| Obstacle { id: a.id.clone(), world_box: a.world_box(), supports: a.walkable_top })
            .collect();
        obstacles.extend(
            scene
                .objects
                .iter()
                .filter(|o| o.id != object_id)
                .map(|o| Obstacle { id: o.id.clone(), world_box: o.world_box(), supports: true }),
        );
        Self::from_obstacles(obstacles, scene)
    }

    fn from_obstacles(obstacles: Vec<Obstacle>, scene: &Scene) -> Self {
        let up = scene.up();
        Self { obstacles, fallback_top: scene.floor().map(|f| f.world_box().top_along(&up)), up }
    }

    pub fn supports(&self) -> Vec<SupportSurface> {
        self.obstacles
            .iter()
            .filter(|o| o.supports)
            .map(|o| SupportSurface::new(&o.id, o.world_box))
            .collect()
    }

    pub fn fallback_top(&self) -> Option<f64> {
        self.fallback_top
    }

    pub fn is_resting(&self, b: &WorldBox) -> bool {
        is_resting(b, &self.supports(), self.fallback_top, &self.up)
    }

    /// Deepest obstacle overlap with `b`, and the obstacle index.
    fn deepest_penetration(&self, b: &WorldBox) -> Option<(usize, f64)> {
        let mut worst: Option<(usize, f64)> = None;
        for (i, o) in self.obstacles.iter().enumerate() {
            let d = penetration_depth(b, &o.world_box);
            if d > PENETRATION_TOLERANCE && worst.is_none_or(|(_, w)| d > w) {
                worst = Some((i, d));
            }
        }
        worst
    }

    pub fn max_penetration(&self, b: &WorldBox) -> f64 {
        self.obstacles
            .iter()
            .map(|o| penetration_depth(b, &o.world_box))
            .fold(0.0, f64::max)
    }

    /// Settles a box produced by `shape_at` for a given pose.
    pub fn settle_with(&self, id: &str, pose: &Pose, shape_at: impl Fn(&Pose) -> WorldBox) -> Result<Pose, PhysicsError> {
        let up = self.up;
        if is_yaw_only(&pose.orientation, &up) {
            let b = shape_at(pose);
            if self.is_resting(&b) && self.deepest_penetration(&b).is_none() {
                return Ok(*pose);
            }
        }

        let mut pose = Pose::new(pose.position, yaw_only(&pose.orientation, &up));
        let release = pose;
        for _ in 0..MAX_SETTLE_ITERATIONS {
            let b = self.drop_onto_support(id, &mut pose, &shape_at)?;
            let Some((hit, _)) = self.deepest_penetration(&b) else {
                return Ok(pose);
            };
            let obstacle = &self.obstacles[hit];
            if obstacle.supports && obstacle.world_box.footprint_contains(&b.center, &up) {
                // Sunk into something that could carry it: climb on top.
                pose.position += up * (obstacle.world_box.top_along(&up) - b.bottom_along(&up));
            } else {
                pose.position += horizontal_push(&b, &obstacle.world_box, &up);
            }
        }
        // Pushes can cycle, e.g. in a gap narrower than the object. Take the
        // nearest ring position where a plain drop comes to rest.
        if let Some(found) = self.ring_search(id, &release, &shape_at)? {
            return Ok(found);
        }
        log::debug!("settle of `{id}` did not converge");
        Err(PhysicsError::PlacementRejected(id.to_string()))
    }

    /// Moves `pose` along up so the box bottom sits on the highest support
    /// below its center (or the floor). Returns the box at the new pose.
    fn drop_onto_support(&self, id: &str, pose: &mut Pose, shape_at: &impl Fn(&Pose) -> WorldBox) -> Result<WorldBox, PhysicsError> {
        let up = self.up;
        let b = shape_at(pose);
        let center_height = b.center.dot(&up);
        let support_top = self
            .obstacles
            .iter()
            .filter(|o| o.supports && o.world_box.footprint_contains(&b.center, &up))
            .map(|o| o.world_box.top_along(&up))
            .filter(|top| *top <= center_height)
            .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))));
        let target = support_top
            .or(self.fallback_top)
            .ok_or_else(|| PhysicsError::NoSupport(id.to_string()))?;
        pose.position += up * (target - b.bottom_along(&up));
        Ok(shape_at(pose))
    }

    /// Drop (and climb) without horizontal pushes; `None` if that leaves
    /// the box penetrating something.
    fn drop_in_place(&self, id: &str, mut pose: Pose, shape_at: &impl Fn(&Pose) -> WorldBox) -> Result<Option<Pose>, PhysicsError> {
        let up = self.up;
        for _ in 0..CLIMB_LIMIT {
            let b = self.drop_onto_support(id, &mut pose, shape_at)?;
            let Some((hit, _)) = self.deepest_penetration(&b) else {
                return Ok(Some(pose));
            };
            let obstacle = &self.obstacles[hit];
            if !(obstacle.supports && obstacle.world_box.footprint_contains(&b.center, &up)) {
                return Ok(None);
            }
            pose.position += up * (obstacle.world_box.top_along(&up) - b.bottom_along(&up));
        }
        Ok(None)
    }

    /// Rings of horizontal offsets around `release`, nearest first, at
    /// `RING_STEP` spacing along and between rings.
    fn ring_search(&self, id: &str, release: &Pose, shape_at: &impl Fn(&Pose) -> WorldBox) -> Result<Option<Pose>, PhysicsError> {
        let up = self.up;
        let seed = if up.x.abs() < 0.9 { Vec3::x() } else { Vec3::z() };
        let e1 = (seed - up * seed.dot(&up)).normalize();
        let e2 = up.cross(&e1);
        for ring in 1..=RING_COUNT {
            let radius = ring as f64 * RING_STEP;
            let count = (std::f64::consts::TAU * radius / RING_STEP).ceil() as usize;
            for k in 0..count {
                let angle = std::f64::consts::TAU * k as f64 / count as f64;
                let offset = (e1 * angle.cos() + e2 * angle.sin()) * radius;
                let candidate = Pose::new(release.position + offset, release.orientation);
                if let Some(found) = self.drop_in_place(id, candidate, shape_at)? {
                    return Ok(Some(found));
                }
            }
        }
        Ok(None)
    }
}

/// Smallest horizontal translation moving `b` clear of `obstacle`, searched
/// over the horizontal projections of both boxes' axes.
fn horizontal_push(b: &WorldBox, obstacle: &WorldBox, up: &Vec3) -> Vec3 {
    let offset = b.center - obstacle.center;
    let mut best: Option<(f64, Vec3)> = None;
    for axis in b.axes.iter().chain(obstacle.axes.iter()) {
        let flat = axis - up * axis.dot(up);
        let n = flat.norm();
        if n < DEGENERATE_AXIS {
            continue;
        }
        let dir = flat / n;
        let along = offset.dot(&dir);
        let overlap = b.radius_along(&dir) + obstacle.radius_along(&dir) - along.abs();
        if overlap > 0.0 && best.is_none_or(|(o, _)| overlap < o) {
            let sign = if along < 0.0 { -1.0 } else { 1.0 };
            best = Some((overlap, dir * sign));
        }
    }
    best.map_or_else(Vec3::zeros, |(overlap, dir)| dir * (overlap + PUSH_MARGIN))
}

/// Rest pose for a released ghost. Snap has priority and is decided by the
/// caller before this runs.
pub fn settle(ghost: &GhostObject, scene: &Scene, others: &[GhostObject]) -> Result<Pose, PhysicsError> {
    settle_ignoring(ghost, scene, others, &[])
}

pub fn settle_ignoring(
    ghost: &GhostObject,
    scene: &Scene,
    others: &[GhostObject],
    ignored: &[String],
) -> Result<Pose, PhysicsError> {
    let object = scene
        .object(&ghost.object_id)
        .ok_or_else(|| PhysicsError::UnknownObject(ghost.object_id.clone()))?;
    let env = Environment::for_ghost_ignoring(ghost, scene, others, ignored)?;
    let factor = ghost.height_factor.unwrap_or(1.0);
    env.settle_with(&ghost.object_id, &ghost.pose, |p| {
        WorldBox::with_height_factor(p, &object.shape, factor)
    })
}
