//! Independent oracles and generators shared by the integration tests.
//!
//! Oracles work on plain `[f64; 3]` arrays with their own quaternion
//! arithmetic and never call the geometry code under test.
#![allow(dead_code)]

use std::path::PathBuf;

use ghost_core::math::{BoxShape, Pose, Vec3};
use ghost_core::scene::{PhysicalObject, Scene, SurfaceAnchor};
use ghost_core::session::{ControllerEvent, EventKind, MenuAction, SessionState};
use nalgebra::UnitQuaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type V3 = [f64; 3];

pub fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: V3, b: V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}

pub fn unit(a: V3) -> V3 {
    scale(a, 1.0 / norm(a))
}

pub fn arr(v: &Vec3) -> V3 {
    [v.x, v.y, v.z]
}

pub fn vec(a: V3) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// Hamilton product of `(w, x, y, z)` quaternions.
pub fn q_mul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

pub fn q_conj(q: [f64; 4]) -> [f64; 4] {
    [q[0], -q[1], -q[2], -q[3]]
}

/// `q v q*` expanded: `v + 2w(u×v) + 2u×(u×v)`.
pub fn q_rotate(q: [f64; 4], v: V3) -> V3 {
    let u = [q[1], q[2], q[3]];
    let t = scale(cross(u, v), 2.0);
    add(add(v, scale(t, q[0])), cross(u, t))
}

/// Rotation angle of a unit quaternion, in `[0, π]`.
pub fn q_angle(q: [f64; 4]) -> f64 {
    let v = norm([q[1], q[2], q[3]]);
    2.0 * v.atan2(q[0].abs())
}

/// Oriented box described by center, orientation and half extents.
#[derive(Clone, Copy, Debug)]
pub struct OBox {
    pub center: V3,
    pub q: [f64; 4],
    pub half: V3,
}

impl OBox {
    pub fn new(pose: &Pose, shape: &BoxShape) -> Self {
        Self { center: arr(&pose.position), q: pose.wxyz(), half: arr(&shape.half_extents) }
    }

    pub fn of_object(o: &PhysicalObject) -> Self {
        Self::new(&o.pose, &o.shape)
    }

    pub fn of_anchor(a: &SurfaceAnchor) -> Self {
        Self::new(&a.pose, &a.shape)
    }

    pub fn local(&self, p: V3) -> V3 {
        q_rotate(q_conj(self.q), sub(p, self.center))
    }

    pub fn world(&self, l: V3) -> V3 {
        add(self.center, q_rotate(self.q, l))
    }

    pub fn contains(&self, p: V3, eps: f64) -> bool {
        let l = self.local(p);
        (0..3).all(|k| l[k].abs() <= self.half[k] + eps)
    }

    pub fn corners(&self) -> Vec<V3> {
        let mut out = Vec::with_capacity(8);
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    out.push(self.world([sx * self.half[0], sy * self.half[1], sz * self.half[2]]));
                }
            }
        }
        out
    }

    /// Eight corners and the center.
    pub fn probes(&self) -> Vec<V3> {
        let mut p = self.corners();
        p.push(self.center);
        p
    }

    pub fn min_y(&self) -> f64 {
        self.corners().iter().map(|c| c[1]).fold(f64::INFINITY, f64::min)
    }

    pub fn max_y(&self) -> f64 {
        self.corners().iter().map(|c| c[1]).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Axis-aligned slab test in the box's local frame, clipped to `t ≥ 0`.
pub fn slab(origin: V3, dir: V3, b: &OBox) -> Option<(f64, f64)> {
    let o = b.local(origin);
    let d = q_rotate(q_conj(b.q), dir);
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for k in 0..3 {
        if d[k] == 0.0 {
            if o[k].abs() > b.half[k] {
                return None;
            }
            continue;
        }
        let a = (-b.half[k] - o[k]) / d[k];
        let c = (b.half[k] - o[k]) / d[k];
        lo = lo.max(a.min(c));
        hi = hi.min(a.max(c));
    }
    (lo <= hi).then_some((lo, hi))
}

/// Entry parameter by marching along the ray with step `step` up to `t_max`,
/// then bisecting the first outside→inside bracket.
pub fn march_entry(origin: V3, dir: V3, b: &OBox, t_max: f64, step: f64) -> Option<f64> {
    let at = |t: f64| add(origin, scale(dir, t));
    if b.contains(origin, 0.0) {
        return Some(0.0);
    }
    let n = (t_max / step).ceil() as usize;
    for i in 1..=n {
        let t = i as f64 * step;
        if b.contains(at(t), 0.0) {
            let (mut lo, mut hi) = (t - step, t);
            for _ in 0..60 {
                let m = 0.5 * (lo + hi);
                if b.contains(at(m), 0.0) {
                    hi = m;
                } else {
                    lo = m;
                }
            }
            return Some(hi);
        }
    }
    None
}

/// Exhaustive first hit: every object and anchor, minimal entry `t`; entries
/// within 1e-9 of the minimum prefer objects, then the smaller id.
pub fn first_hit_oracle(origin: V3, dir: V3, scene: &Scene) -> Option<(String, bool, f64)> {
    let mut hits: Vec<(String, bool, f64)> = Vec::new();
    for o in &scene.objects {
        if let Some((t, _)) = slab(origin, dir, &OBox::of_object(o)) {
            hits.push((o.id.clone(), true, t));
        }
    }
    for a in &scene.anchors {
        if let Some((t, _)) = slab(origin, dir, &OBox::of_anchor(a)) {
            hits.push((a.id.clone(), false, t));
        }
    }
    let t_min = hits.iter().map(|h| h.2).fold(f64::INFINITY, f64::min);
    hits.into_iter().filter(|h| h.2 - t_min <= 1e-9).min_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)))
}

/// Overlap depth of two axis-aligned boxes; zero when disjoint.
pub fn aabb_penetration(c1: V3, h1: V3, c2: V3, h2: V3) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..3 {
        let o = h1[k] + h2[k] - (c1[k] - c2[k]).abs();
        if o <= 0.0 {
            return 0.0;
        }
        best = best.min(o);
    }
    best
}

/// Searches for a point inside both boxes by sampling inside `a`.
pub fn sampled_common_point(a: &OBox, b: &OBox, rng: &mut ChaCha8Rng, samples: usize) -> bool {
    (0..samples).any(|_| {
        let l = [
            rng.random_range(-1.0..=1.0) * a.half[0],
            rng.random_range(-1.0..=1.0) * a.half[1],
            rng.random_range(-1.0..=1.0) * a.half[2],
        ];
        b.contains(a.world(l), 0.0)
    })
}

/// Lasso cone checked in gnomonic projection, where great circles through
/// the apex become straight lines and the spherical polygon becomes a plain
/// planar polygon.
#[derive(Clone, Debug)]
pub struct PlanarLasso {
    apex: V3,
    mean: V3,
    e1: V3,
    e2: V3,
    poly: Vec<[f64; 2]>,
    t_max: f64,
}

impl PlanarLasso {
    /// `None` when some boundary direction is not in the open hemisphere
    /// around the mean direction (projection undefined).
    pub fn new(apex: V3, boundary: &[V3], t_max: f64) -> Option<Self> {
        let dirs: Vec<V3> = boundary.iter().map(|p| unit(sub(*p, apex))).collect();
        let mut sum = [0.0; 3];
        for d in &dirs {
            sum = add(sum, *d);
        }
        let mean = unit(sum);
        let helper = if mean[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let e1 = unit(cross(mean, helper));
        let e2 = cross(mean, e1);
        let mut me = Self { apex, mean, e1, e2, poly: Vec::new(), t_max };
        let mut poly = Vec::with_capacity(dirs.len());
        for d in &dirs {
            poly.push(me.project(*d)?);
        }
        me.poly = poly;
        Some(me)
    }

    fn project(&self, u: V3) -> Option<[f64; 2]> {
        let m = dot(u, self.mean);
        (m > 1e-9).then(|| [dot(u, self.e1) / m, dot(u, self.e2) / m])
    }

    pub fn contains(&self, p: V3) -> bool {
        let v = sub(p, self.apex);
        let dist = norm(v);
        if !(dist > 0.0 && dist <= self.t_max) {
            return false;
        }
        match self.project(scale(v, 1.0 / dist)) {
            Some(q) => winding_2d(&self.poly, q) != 0,
            None => false,
        }
    }
}

/// Planar winding number by signed upward/downward edge crossings.
pub fn winding_2d(poly: &[[f64; 2]], p: [f64; 2]) -> i32 {
    let is_left = |a: [f64; 2], b: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
    let mut w = 0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        if a[1] <= p[1] {
            if b[1] > p[1] && is_left(a, b) > 0.0 {
                w += 1;
            }
        } else if b[1] <= p[1] && is_left(a, b) < 0.0 {
            w -= 1;
        }
    }
    w
}

/// Even-odd containment for simple planar polygons.
pub fn even_odd(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Objects with at least one of the nine probes inside the lasso, sorted.
pub fn nine_probe_selection(scene: &Scene, lasso: &PlanarLasso) -> Vec<String> {
    let mut ids: Vec<String> = scene
        .objects
        .iter()
        .filter(|o| OBox::of_object(o).probes().into_iter().any(|p| lasso.contains(p)))
        .map(|o| o.id.clone())
        .collect();
    ids.sort();
    ids
}

/// Quadratic Bézier with control point over the chord midpoint.
#[derive(Clone, Copy, Debug)]
pub struct ArcOracle {
    pub p0: V3,
    pub c: V3,
    pub p1: V3,
}

impl ArcOracle {
    pub fn new(p0: V3, p1: V3, min_apex: f64, ratio: f64) -> Self {
        let h = min_apex.max(ratio * norm(sub(p1, p0)));
        let mid = scale(add(p0, p1), 0.5);
        Self { p0, c: add(mid, [0.0, h, 0.0]), p1 }
    }

    pub fn at(&self, t: f64) -> V3 {
        let u = 1.0 - t;
        add(add(scale(self.p0, u * u), scale(self.c, 2.0 * u * t)), scale(self.p1, t * t))
    }

    /// Minimum distance over `n + 1` uniform samples.
    pub fn brute_distance(&self, p: V3, n: usize) -> f64 {
        (0..=n).map(|i| norm(sub(self.at(i as f64 / n as f64), p))).fold(f64::INFINITY, f64::min)
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_unit_quat(rng: &mut ChaCha8Rng) -> [f64; 4] {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 0.1 && n < 1.0 {
            return q.map(|c| c / n);
        }
    }
}

pub fn yaw_quat(theta: f64) -> [f64; 4] {
    [(theta / 2.0).cos(), 0.0, (theta / 2.0).sin(), 0.0]
}

pub fn random_pose(rng: &mut ChaCha8Rng, extent: f64) -> Pose {
    let p: [f64; 3] = std::array::from_fn(|_| rng.random_range(-extent..extent));
    Pose::from_arrays(p, random_unit_quat(rng))
}

pub fn floor_anchor(half: f64) -> SurfaceAnchor {
    SurfaceAnchor {
        id: "floor".into(),
        label: "floor".into(),
        pose: Pose::from_translation(Vec3::new(0.0, -0.05, 0.0)),
        shape: BoxShape::new(half, 0.05, half),
        walkable_top: true,
    }
}

pub fn block(id: &str, pose: Pose, half: Vec3) -> PhysicalObject {
    PhysicalObject {
        id: id.into(),
        label: "box".into(),
        shape: BoxShape::new(half.x, half.y, half.z),
        pose,
        default_pose: pose,
        graspable: true,
        fillable: None,
        compressible: None,
    }
}

/// Floor plus `n` yawed boxes standing on it at random places.
pub fn random_floor_scene(rng: &mut ChaCha8Rng, n: usize) -> Scene {
    let objects = (0..n)
        .map(|i| {
            let half = Vec3::new(rng.random_range(0.03..0.2), rng.random_range(0.03..0.25), rng.random_range(0.03..0.2));
            let p = [rng.random_range(-1.5..1.5), half.y, rng.random_range(-1.5..1.5)];
            let pose = Pose::from_arrays(p, yaw_quat(rng.random_range(-3.2..3.2)));
            block(&format!("obj_{i:02}"), pose, half)
        })
        .collect();
    Scene::new(vec![floor_anchor(3.0)], objects)
}

/// Arbitrary boxes and anchors at arbitrary orientations.
pub fn random_cluttered_scene(rng: &mut ChaCha8Rng) -> Scene {
    let n_objects = rng.random_range(1..12);
    let n_anchors = rng.random_range(1..5);
    let objects = (0..n_objects)
        .map(|i| {
            let half = Vec3::new(rng.random_range(0.05..0.6), rng.random_range(0.05..0.6), rng.random_range(0.05..0.6));
            block(&format!("o{i}"), random_pose(rng, 3.0), half)
        })
        .collect();
    let anchors = (0..n_anchors)
        .map(|i| {
            let pose = random_pose(rng, 3.0);
            SurfaceAnchor {
                id: format!("a{i}"),
                label: "surface".into(),
                pose,
                shape: BoxShape::new(rng.random_range(0.2..2.0), rng.random_range(0.05..0.5), rng.random_range(0.2..2.0)),
                walkable_top: rng.random_bool(0.5),
            }
        })
        .collect();
    Scene::new(anchors, objects)
}

/// Mostly aimed near a random target center so that hits are common.
pub fn random_ray_direction(rng: &mut ChaCha8Rng, origin: V3, scene: &Scene) -> V3 {
    let centers: Vec<V3> = scene
        .objects
        .iter()
        .map(|o| arr(&o.pose.position))
        .chain(scene.anchors.iter().map(|a| arr(&a.pose.position)))
        .collect();
    if rng.random_bool(0.2) || centers.is_empty() {
        return unit(std::array::from_fn(|_| rng.random_range(-1.0..1.0)));
    }
    let c = centers[rng.random_range(0..centers.len())];
    let jitter: V3 = std::array::from_fn(|_| rng.random_range(-0.5..0.5));
    unit(sub(add(c, jitter), origin))
}

pub fn core_dir() -> PathBuf {
    let here = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    if here.join("fixtures").is_dir() {
        here
    } else {
        here.join("../core")
    }
}

pub fn read(rel: &str) -> String {
    let path = core_dir().join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

pub fn room_tidy() -> Scene {
    Scene::from_json(&read("fixtures/room_tidy.json")).expect("fixture loads")
}

pub const GOLDENS: [&str; 4] = ["click_settle", "empty", "fill_fig4", "tidy_fig3"];

/// Controller pose at `origin` whose forward (+Z) points at `target`.
pub fn aim(origin: Vec3, target: Vec3) -> Pose {
    let d = (target - origin).normalize();
    let q = UnitQuaternion::rotation_between(&Vec3::z(), &d)
        .unwrap_or_else(|| UnitQuaternion::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI));
    Pose::new(origin, q)
}

/// Drives a session with monotonically timed events.
pub struct Driver {
    pub state: SessionState,
    t: f64,
    pose: Pose,
}

impl Driver {
    pub fn new(state: SessionState) -> Self {
        Self { state, t: 0.0, pose: Pose::identity() }
    }

    fn send(&mut self, kind: EventKind) {
        self.t += 1.0 / 60.0;
        self.state.step(&ControllerEvent::new(self.t, kind));
    }

    pub fn pose(&mut self, pose: Pose) {
        self.pose = pose;
        self.send(EventKind::PoseUpdate(pose));
    }

    pub fn aim(&mut self, origin: Vec3, target: Vec3) {
        self.pose(aim(origin, target));
    }

    /// Translates the controller by `delta` in `steps` updates, keeping its
    /// orientation.
    pub fn carry(&mut self, delta: Vec3, steps: usize) {
        let start = self.pose;
        for i in 1..=steps {
            let s = i as f64 / steps as f64;
            self.pose(Pose::new(start.position + delta * s, start.orientation));
        }
    }

    pub fn down(&mut self) {
        self.send(EventKind::TriggerDown);
    }

    pub fn up(&mut self) {
        self.send(EventKind::TriggerUp);
    }

    pub fn click(&mut self) {
        self.down();
        self.up();
    }

    pub fn menu(&mut self, action: MenuAction) {
        self.send(EventKind::Menu(action));
    }
}
