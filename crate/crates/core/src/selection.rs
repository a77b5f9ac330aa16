//! Trigger strokes to selections: a short press selects the first object on
//! the ray, a drawn loop selects everything overlapping the lasso volume.

use crate::config::Config;
use crate::geometry::{self, first_hit, surface_hit_point, LassoVolume, Ray, TargetKind};
use crate::math::Vec3;
use crate::scene::Scene;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SelectionError {
    #[error("stroke sample at t={got} does not follow t={last}")]
    OutOfOrder { last: f64, got: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrokeSample {
    pub time: f64,
    pub ray: Ray,
    pub surface_point: Option<Vec3>,
}

/// Samples collected while the trigger is held.
#[derive(Clone, Debug, PartialEq)]
pub struct Stroke {
    samples: Vec<StrokeSample>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionMode {
    Single,
    Lasso,
    Empty,
}

impl SelectionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectionMode::Single => "single",
            SelectionMode::Lasso => "lasso",
            SelectionMode::Empty => "empty",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionResult {
    /// Sorted, duplicate-free object ids.
    pub object_ids: Vec<String>,
    pub mode: SelectionMode,
    /// The volume used for lasso selections.
    pub lasso: Option<LassoVolume>,
}

impl SelectionResult {
    pub fn empty() -> Self {
        Self { object_ids: Vec::new(), mode: SelectionMode::Empty, lasso: None }
    }

    pub fn is_empty(&self) -> bool {
        self.object_ids.is_empty()
    }
}

fn sample(ray: Ray, time: f64, scene: &Scene) -> StrokeSample {
    let surface_point = surface_hit_point(&ray, scene).map(|h| h.point);
    StrokeSample { time, ray, surface_point }
}

impl Stroke {
    /// Starts a stroke on trigger-down.
    pub fn begin(ray: Ray, time: f64, scene: &Scene) -> Self {
        Self { samples: vec![sample(ray, time, scene)] }
    }

    pub fn extend(&mut self, ray: Ray, time: f64, scene: &Scene) -> Result<(), SelectionError> {
        let last = self.samples.last().expect("stroke has at least one sample").time;
        if time.partial_cmp(&last) != Some(std::cmp::Ordering::Greater) {
            return Err(SelectionError::OutOfOrder { last, got: time });
        }
        self.samples.push(sample(ray, time, scene));
        Ok(())
    }

    pub fn samples(&self) -> &[StrokeSample] {
        &self.samples
    }

    /// Controller position at the latest sample.
    pub fn apex(&self) -> Vec3 {
        self.samples.last().expect("non-empty stroke").ray.origin
    }

    /// Surface points in order; misses are skipped.
    pub fn boundary_candidates(&self) -> Vec<Vec3> {
        self.samples.iter().filter_map(|s| s.surface_point).collect()
    }

    /// Length of the polyline through the surface points.
    pub fn surface_path_length(&self) -> f64 {
        self.boundary_candidates().windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Decides click vs lasso on trigger release and resolves the selection.
    pub fn end(&self, scene: &Scene, config: &Config) -> SelectionResult {
        let candidates = self.boundary_candidates();
        if candidates.len() < 3 || self.surface_path_length() < config.click_threshold {
            return self.single_select(scene);
        }
        let boundary = downsample_boundary(&candidates, config.lasso_spacing);
        let volume = match LassoVolume::with_depth_factor(self.apex(), boundary, config.t_max_factor) {
            Ok(v) => v,
            Err(e) => {
                log::debug!("lasso degenerated ({e}); treating stroke as a click");
                return self.single_select(scene);
            }
        };
        let mut object_ids: Vec<String> = scene
            .objects
            .iter()
            .filter(|o| geometry::world_box_overlaps_lasso(&o.world_box(), &volume))
            .map(|o| o.id.clone())
            .collect();
        object_ids.sort();
        let mode = if object_ids.is_empty() { SelectionMode::Empty } else { SelectionMode::Lasso };
        SelectionResult { object_ids, mode, lasso: Some(volume) }
    }

    /// Uses the ray at trigger press.
    fn single_select(&self, scene: &Scene) -> SelectionResult {
        match first_hit(&self.samples[0].ray, scene) {
            Some(hit) if hit.kind == TargetKind::Object => {
                SelectionResult { object_ids: vec![hit.target_id], mode: SelectionMode::Single, lasso: None }
            }
            _ => SelectionResult::empty(),
        }
    }
}

/// Greedy thinning: keeps a point when it is at least `spacing` from the last
/// kept point and not a near-duplicate of any kept point; the closing point
/// is dropped when it lands within `spacing` of the first.
pub fn downsample_boundary(points: &[Vec3], spacing: f64) -> Vec<Vec3> {
    let mut kept: Vec<Vec3> = Vec::new();
    for p in points {
        let far_from_last = kept.last().is_none_or(|l| (p - l).norm() >= spacing);
        let distinct = kept.iter().all(|k| (p - k).norm() > geometry::MIN_BOUNDARY_SEPARATION);
        if far_from_last && distinct {
            kept.push(*p);
        }
    }
    while kept.len() > 3 && (kept[kept.len() - 1] - kept[0]).norm() < spacing {
        kept.pop();
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{BoxShape, Pose};
    use crate::scene::{PhysicalObject, SurfaceAnchor};

    fn scene() -> Scene {
        let block = |id: &str, x: f64, z: f64| {
            let pose = Pose::from_translation(Vec3::new(x, 0.05, z));
            PhysicalObject {
                id: id.into(),
                label: "block".into(),
                shape: BoxShape::cube(0.05),
                pose,
                default_pose: pose,
                graspable: true,
                fillable: None,
                compressible: None,
            }
        };
        Scene::new(
            vec![SurfaceAnchor {
                id: "floor".into(),
                label: "floor".into(),
                pose: Pose::from_translation(Vec3::new(0.0, -0.05, 0.0)),
                shape: BoxShape::new(5.0, 0.05, 5.0),
                walkable_top: true,
            }],
            vec![
                block("b1", 0.3, 0.0),
                block("b2", -0.3, 0.1),
                block("b3", 0.0, -0.3),
                block("b4", 2.0, 0.0),
                block("b5", -2.0, 1.0),
                block("b6", 0.0, 2.5),
            ],
        )
    }

    fn ray_to(from: Vec3, to: Vec3) -> Ray {
        Ray::new(from, (to - from).normalize()).unwrap()
    }

    fn circle_stroke(scene: &Scene, n: usize, radius: f64) -> Stroke {
        let apex = Vec3::new(0.0, 1.5, 0.8);
        let at = |i: usize| {
            let a = i as f64 / n as f64 * std::f64::consts::TAU;
            Vec3::new(radius * a.cos(), 0.0, radius * a.sin())
        };
        let mut s = Stroke::begin(ray_to(apex, at(0)), 0.0, scene);
        for i in 1..n {
            s.extend(ray_to(apex, at(i)), i as f64 * 0.02, scene).unwrap();
        }
        s
    }

    #[test]
    fn begin_on_floor_records_point() {
        let sc = scene();
        let s = Stroke::begin(ray_to(Vec3::new(0.0, 2.0, 0.0), Vec3::new(1.0, 0.0, 1.0)), 0.0, &sc);
        assert_eq!(s.samples().len(), 1);
        assert!(s.samples()[0].surface_point.is_some());
    }

    #[test]
    fn begin_at_sky_has_no_point() {
        let s = Stroke::begin(Ray::new(Vec3::new(0.0, 1.0, 0.0), Vec3::y()).unwrap(), 0.0, &scene());
        assert_eq!(s.samples().len(), 1);
        assert_eq!(s.samples()[0].surface_point, None);
    }

    #[test]
    fn misses_do_not_add_boundary_candidates() {
        let sc = scene();
        let mut s = Stroke::begin(ray_to(Vec3::new(0.0, 2.0, 0.0), Vec3::new(1.0, 0.0, 1.0)), 0.0, &sc);
        s.extend(ray_to(Vec3::new(0.0, 2.0, 0.0), Vec3::new(1.0, 0.0, 1.5)), 0.1, &sc).unwrap();
        assert_eq!(s.boundary_candidates().len(), 2);
        s.extend(Ray::new(Vec3::new(0.0, 2.0, 0.0), Vec3::y()).unwrap(), 0.2, &sc).unwrap();
        assert_eq!(s.boundary_candidates().len(), 2);
        assert_eq!(s.samples().len(), 3);
    }

    #[test]
    fn out_of_order_sample_rejected() {
        let sc = scene();
        let r = ray_to(Vec3::new(0.0, 2.0, 0.0), Vec3::zeros());
        let mut s = Stroke::begin(r, 1.0, &sc);
        assert_eq!(s.extend(r, 1.0, &sc), Err(SelectionError::OutOfOrder { last: 1.0, got: 1.0 }));
    }

    #[test]
    fn circular_sweep_yields_all_candidates() {
        let sc = scene();
        assert_eq!(circle_stroke(&sc, 50, 0.6).boundary_candidates().len(), 50);
    }

    #[test]
    fn click_on_block_selects_it() {
        let sc = scene();
        let s = Stroke::begin(ray_to(Vec3::new(0.3, 1.5, 0.5), Vec3::new(0.3, 0.05, 0.0)), 0.0, &sc);
        let r = s.end(&sc, &Config::default());
        assert_eq!(r.mode, SelectionMode::Single);
        assert_eq!(r.object_ids, vec!["b1".to_string()]);
    }

    #[test]
    fn click_on_floor_selects_nothing() {
        let sc = scene();
        let s = Stroke::begin(ray_to(Vec3::new(0.0, 1.5, 0.0), Vec3::new(1.0, 0.0, 1.0)), 0.0, &sc);
        assert_eq!(s.end(&sc, &Config::default()).mode, SelectionMode::Empty);
    }

    #[test]
    fn circular_lasso_selects_enclosed_blocks() {
        let sc = scene();
        let r = circle_stroke(&sc, 50, 0.6).end(&sc, &Config::default());
        assert_eq!(r.mode, SelectionMode::Lasso);
        assert_eq!(r.object_ids, vec!["b1", "b2", "b3"]);
        assert!(r.lasso.is_some());
    }

    #[test]
    fn sky_stroke_is_empty() {
        let sc = scene();
        let up = Ray::new(Vec3::new(0.0, 1.0, 0.0), Vec3::y()).unwrap();
        let mut s = Stroke::begin(up, 0.0, &sc);
        s.extend(up, 0.1, &sc).unwrap();
        let r = s.end(&sc, &Config::default());
        assert_eq!(r, SelectionResult::empty());
    }

    #[test]
    fn short_jitter_is_a_click_regardless_of_duration() {
        let sc = scene();
        let apex = Vec3::new(0.3, 1.5, 0.5);
        let target = Vec3::new(0.3, 0.05, 0.0);
        let mut s = Stroke::begin(ray_to(apex, target), 0.0, &sc);
        for i in 1..40 {
            let wobble = Vec3::new(0.001 * (i % 3) as f64, 0.0, 0.0);
            s.extend(ray_to(apex, target + wobble), i as f64 * 0.5, &sc).unwrap();
        }
        let r = s.end(&sc, &Config::default());
        assert_eq!(r.mode, SelectionMode::Single);
        assert_eq!(r.object_ids, vec!["b1"]);
    }

    #[test]
    fn downsampling_respects_spacing_and_closure() {
        let pts: Vec<Vec3> = (0..=80).map(|i| Vec3::new(i as f64 * 0.125, 0.0, 0.0)).collect();
        let kept = downsample_boundary(&pts, 1.0);
        assert_eq!(kept.len(), 11);
        for w in kept.windows(2) {
            assert!((w[1] - w[0]).norm() >= 1.0);
        }
    }
}
