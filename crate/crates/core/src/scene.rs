//! The authoritative "real" scene: anchored surfaces and physical objects,
//! plus its canonical on-disk JSON format.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canon;
use crate::math::{BoxShape, Pose, Vec3, WorldBox, UNIT_TOLERANCE};
use crate::physics::{self, SupportSurface};

pub const SCENE_VERSION: u32 = 1;

/// Objects may overlap by at most this much at load.
pub const LOAD_OVERLAP_TOLERANCE: f64 = 1e-6;

/// cos(30°): walkable tops must face within 30° of world-up.
const WALKABLE_COS: f64 = 0.866_025_403_784_438_6;

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceAnchor {
    pub id: String,
    pub label: String,
    pub pose: Pose,
    pub shape: BoxShape,
    pub walkable_top: bool,
}

impl SurfaceAnchor {
    pub fn world_box(&self) -> WorldBox {
        WorldBox::new(&self.pose, &self.shape)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fillable {
    pub fill_level: f64,
    pub capacity_height: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Compressible {
    pub min_height_factor: f64,
    pub current_factor: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalObject {
    pub id: String,
    pub label: String,
    pub shape: BoxShape,
    pub pose: Pose,
    pub default_pose: Pose,
    pub graspable: bool,
    pub fillable: Option<Fillable>,
    pub compressible: Option<Compressible>,
}

impl PhysicalObject {
    pub fn height_factor(&self) -> f64 {
        self.compressible.map_or(1.0, |c| c.current_factor)
    }

    pub fn fill_level(&self) -> Option<f64> {
        self.fillable.map(|f| f.fill_level)
    }

    /// Box at an arbitrary pose, with this object's current compression.
    pub fn box_at(&self, pose: &Pose) -> WorldBox {
        WorldBox::with_height_factor(pose, &self.shape, self.height_factor())
    }

    pub fn world_box(&self) -> WorldBox {
        self.box_at(&self.pose)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub anchors: Vec<SurfaceAnchor>,
    pub objects: Vec<PhysicalObject>,
    pub gravity_up: Vec3,
}

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("scene parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("scene validation failed for `{id}`: {reason}")]
    Validation { id: String, reason: String },
}

fn invalid(id: &str, reason: impl Into<String>) -> SceneError {
    SceneError::Validation { id: id.to_string(), reason: reason.into() }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    version: u32,
    #[serde(default = "default_up")]
    gravity_up: [f64; 3],
    anchors: Vec<AnchorFile>,
    objects: Vec<ObjectFile>,
}

fn default_up() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnchorFile {
    id: String,
    label: String,
    pose: Pose,
    half_extents: [f64; 3],
    walkable_top: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectFile {
    id: String,
    label: String,
    pose: Pose,
    half_extents: [f64; 3],
    #[serde(default)]
    default_pose: Option<Pose>,
    graspable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fillable: Option<Fillable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    compressible: Option<Compressible>,
}

impl Scene {
    pub fn new(anchors: Vec<SurfaceAnchor>, objects: Vec<PhysicalObject>) -> Self {
        Self { anchors, objects, gravity_up: Vec3::y() }
    }

    pub fn up(&self) -> Vec3 {
        self.gravity_up
    }

    pub fn object(&self, id: &str) -> Option<&PhysicalObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_mut(&mut self, id: &str) -> Option<&mut PhysicalObject> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    pub fn anchor(&self, id: &str) -> Option<&SurfaceAnchor> {
        self.anchors.iter().find(|a| a.id == id)
    }

    /// Top height of the lowest walkable anchor, the fallback support.
    pub fn floor(&self) -> Option<&SurfaceAnchor> {
        let up = self.up();
        self.anchors
            .iter()
            .filter(|a| a.walkable_top)
            .min_by(|a, b| {
                a.world_box()
                    .top_along(&up)
                    .total_cmp(&b.world_box().top_along(&up))
                    .then_with(|| a.id.cmp(&b.id))
            })
    }

    pub fn from_json(text: &str) -> Result<Scene, SceneError> {
        let file: SceneFile = serde_json::from_str(text)?;
        if file.version != SCENE_VERSION {
            return Err(invalid("scene", format!("unsupported version {}", file.version)));
        }
        let anchors = file
            .anchors
            .into_iter()
            .map(|a| SurfaceAnchor {
                id: a.id,
                label: a.label,
                pose: a.pose,
                shape: BoxShape { half_extents: Vec3::from(a.half_extents) },
                walkable_top: a.walkable_top,
            })
            .collect();
        let objects = file
            .objects
            .into_iter()
            .map(|o| PhysicalObject {
                default_pose: o.default_pose.unwrap_or(o.pose),
                id: o.id,
                label: o.label,
                shape: BoxShape { half_extents: Vec3::from(o.half_extents) },
                pose: o.pose,
                graspable: o.graspable,
                fillable: o.fillable,
                compressible: o.compressible,
            })
            .collect();
        let scene = Scene { anchors, objects, gravity_up: Vec3::from(file.gravity_up) };
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_value(&self) -> Value {
        let arr = |v: &Vec3| [v.x, v.y, v.z];
        let file = SceneFile {
            version: SCENE_VERSION,
            gravity_up: arr(&self.gravity_up),
            anchors: self
                .anchors
                .iter()
                .map(|a| AnchorFile {
                    id: a.id.clone(),
                    label: a.label.clone(),
                    pose: a.pose,
                    half_extents: arr(&a.shape.half_extents),
                    walkable_top: a.walkable_top,
                })
                .collect(),
            objects: self
                .objects
                .iter()
                .map(|o| ObjectFile {
                    id: o.id.clone(),
                    label: o.label.clone(),
                    pose: o.pose,
                    half_extents: arr(&o.shape.half_extents),
                    default_pose: Some(o.default_pose),
                    graspable: o.graspable,
                    fillable: o.fillable,
                    compressible: o.compressible,
                })
                .collect(),
        };
        canon::value_of(&file)
    }

    /// Canonical text: sorted keys, 17 significant digits, trailing newline.
    pub fn to_json(&self) -> String {
        canon::to_document(&self.to_value())
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let up = self.gravity_up;
        if !up.iter().all(|c| c.is_finite()) || (up.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(invalid("scene", "gravity_up must be a unit vector"));
        }

        let mut ids = BTreeSet::new();
        for id in self.anchors.iter().map(|a| &a.id).chain(self.objects.iter().map(|o| &o.id)) {
            if id.is_empty() {
                return Err(invalid(id, "ids must be non-empty"));
            }
            if !ids.insert(id.as_str()) {
                return Err(invalid(id, "duplicate id"));
            }
        }

        for a in &self.anchors {
            a.pose.validate().map_err(|r| invalid(&a.id, r))?;
            a.shape.validate().map_err(|r| invalid(&a.id, r))?;
            if a.walkable_top && (a.pose.orientation * Vec3::y()).dot(&up) < WALKABLE_COS {
                return Err(invalid(&a.id, "walkable top tilts more than 30° from up"));
            }
        }

        for o in &self.objects {
            o.pose.validate().map_err(|r| invalid(&o.id, format!("pose: {r}")))?;
            o.default_pose.validate().map_err(|r| invalid(&o.id, format!("default_pose: {r}")))?;
            o.shape.validate().map_err(|r| invalid(&o.id, r))?;
            if let Some(f) = o.fillable {
                if !(0.0..=1.0).contains(&f.fill_level) {
                    return Err(invalid(&o.id, "fill_level outside [0, 1]"));
                }
                if !(f.capacity_height.is_finite() && f.capacity_height > 0.0) {
                    return Err(invalid(&o.id, "capacity_height must be positive"));
                }
            }
            if let Some(c) = o.compressible {
                if !(c.min_height_factor > 0.0 && c.min_height_factor <= 1.0) {
                    return Err(invalid(&o.id, "min_height_factor outside (0, 1]"));
                }
                if !(c.min_height_factor..=1.0).contains(&c.current_factor) {
                    return Err(invalid(&o.id, "current_factor outside [min_height_factor, 1]"));
                }
            }
        }

        let boxes: Vec<WorldBox> = self.objects.iter().map(|o| o.world_box()).collect();
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                let depth = physics::penetration_depth(&boxes[i], &boxes[j]);
                if depth > LOAD_OVERLAP_TOLERANCE {
                    let (a, b) = (&self.objects[i].id, &self.objects[j].id);
                    return Err(invalid(a, format!("interpenetrates `{b}` by {depth} m")));
                }
            }
        }

        for o in &self.objects {
            let mut supports = self.anchor_supports();
            for other in self.objects.iter().filter(|p| p.id != o.id) {
                supports.push(SupportSurface::new(&other.id, other.world_box()));
                supports.push(SupportSurface::new(&other.id, other.box_at(&other.default_pose)));
            }
            let fallback = self.floor().map(|f| f.world_box().top_along(&up));
            if !physics::is_resting(&o.box_at(&o.default_pose), &supports, fallback, &up) {
                return Err(invalid(&o.id, "default_pose does not rest on a support surface"));
            }
        }
        Ok(())
    }

    /// Top faces of walkable anchors.
    pub fn anchor_supports(&self) -> Vec<SupportSurface> {
        self.anchors
            .iter()
            .filter(|a| a.walkable_top)
            .map(|a| SupportSurface::new(&a.id, a.world_box()))
            .collect()
    }
}
