//! Virtual twins: aligned spawn, rigid group grab/move, and the two state
//! deformations (fill level and compression).

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::math::{Pose, WorldBox};
use crate::scene::{PhysicalObject, Scene};
use crate::selection::SelectionResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GhostPhase {
    Aligned,
    Grabbed,
    Placed,
}

impl GhostPhase {
    pub fn as_str(&self) -> &'static str {
        match self {
            GhostPhase::Aligned => "aligned",
            GhostPhase::Grabbed => "grabbed",
            GhostPhase::Placed => "placed",
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GhostError {
    #[error("selection is empty")]
    EmptySelection,
    #[error("unknown object `{0}` (stale selection?)")]
    UnknownObject(String),
    #[error("`{0}` is not a member of the grabbed group")]
    NotInGroup(String),
    #[error("`{0}` is not fillable")]
    NotFillable(String),
    #[error("`{0}` is not compressible")]
    NotCompressible(String),
    #[error("height factor {factor} outside [{min}, 1]")]
    FactorOutOfRange { factor: f64, min: f64 },
    #[error("`{0}` must be placed before its default can be redefined")]
    NotPlaced(String),
}

/// Virtual twin of one physical object.
#[derive(Clone, Debug, PartialEq)]
pub struct GhostObject {
    pub object_id: String,
    pub pose: Pose,
    pub fill_level: Option<f64>,
    pub height_factor: Option<f64>,
    pub phase: GhostPhase,
    pub group_id: u64,
}

impl GhostObject {
    /// Twin overlaid exactly on `object`.
    pub fn aligned_with(object: &PhysicalObject, group_id: u64) -> Self {
        Self {
            object_id: object.id.clone(),
            pose: object.pose,
            fill_level: object.fill_level(),
            height_factor: object.compressible.map(|c| c.current_factor),
            phase: GhostPhase::Aligned,
            group_id,
        }
    }

    pub fn world_box(&self, scene: &Scene) -> Option<WorldBox> {
        let object = scene.object(&self.object_id)?;
        Some(WorldBox::with_height_factor(&self.pose, &object.shape, self.height_factor.unwrap_or(1.0)))
    }

    /// Whether pose and deformation state match the physical object exactly.
    pub fn matches(&self, object: &PhysicalObject) -> bool {
        self.pose.bit_eq(&object.pose)
            && self.fill_level == object.fill_level()
            && self.height_factor == object.compressible.map(|c| c.current_factor)
    }

    pub fn to_value(&self) -> Value {
        let mut v = json!({
            "object_id": self.object_id,
            "pose": crate::canon::value_of(&self.pose),
            "phase": self.phase.as_str(),
            "group_id": self.group_id,
        });
        if let Some(f) = self.fill_level {
            v["fill_level"] = json!(f);
        }
        if let Some(h) = self.height_factor {
            v["height_factor"] = json!(h);
        }
        v
    }
}

/// One aligned ghost per selected object, all sharing `group_id`.
pub fn spawn_ghosts(selection: &SelectionResult, scene: &Scene, group_id: u64) -> Result<Vec<GhostObject>, GhostError> {
    if selection.is_empty() {
        return Err(GhostError::EmptySelection);
    }
    selection
        .object_ids
        .iter()
        .map(|id| {
            scene
                .object(id)
                .map(|o| GhostObject::aligned_with(o, group_id))
                .ok_or_else(|| GhostError::UnknownObject(id.clone()))
        })
        .collect()
}

/// Rigid attachment of a ghost group to the controller.
#[derive(Clone, Debug, PartialEq)]
pub struct GrabState {
    pub anchor_ghost: String,
    pub group_id: u64,
    pub controller_at_grab: Pose,
    /// `controller⁻¹ ∘ ghost` at grab time, per object id.
    pub grab_offsets: BTreeMap<String, Pose>,
    pub poses_at_grab: BTreeMap<String, Pose>,
}

pub fn grab(group: &mut [GhostObject], controller: &Pose, pointed_ghost: &str) -> Result<GrabState, GhostError> {
    let Some(anchor) = group.iter().find(|g| g.object_id == pointed_ghost) else {
        return Err(GhostError::NotInGroup(pointed_ghost.to_string()));
    };
    let group_id = anchor.group_id;
    let inverse = controller.inverse();
    let mut grab_offsets = BTreeMap::new();
    let mut poses_at_grab = BTreeMap::new();
    for g in group.iter_mut() {
        grab_offsets.insert(g.object_id.clone(), inverse.compose(&g.pose));
        poses_at_grab.insert(g.object_id.clone(), g.pose);
        g.phase = GhostPhase::Grabbed;
    }
    Ok(GrabState {
        anchor_ghost: pointed_ghost.to_string(),
        group_id,
        controller_at_grab: *controller,
        grab_offsets,
        poses_at_grab,
    })
}

/// Moves every grabbed ghost to `controller ∘ offset`. An unmoved controller
/// restores the grab-time poses exactly.
pub fn move_group(grab: &GrabState, group: &mut [GhostObject], controller: &Pose) {
    let unmoved = controller.bit_eq(&grab.controller_at_grab);
    for g in group.iter_mut() {
        if unmoved {
            if let Some(p) = grab.poses_at_grab.get(&g.object_id) {
                g.pose = *p;
            }
        } else if let Some(offset) = grab.grab_offsets.get(&g.object_id) {
            g.pose = controller.compose(offset);
        }
    }
}

/// New fill level from vertical hand travel: one capacity height of travel
/// spans empty to full.
pub fn set_fill_by_drag(
    ghost: &mut GhostObject,
    scene: &Scene,
    start_controller_height: f64,
    current_controller_height: f64,
    start_level: f64,
) -> Result<f64, GhostError> {
    let object = scene
        .object(&ghost.object_id)
        .ok_or_else(|| GhostError::UnknownObject(ghost.object_id.clone()))?;
    let fillable = object.fillable.ok_or_else(|| GhostError::NotFillable(ghost.object_id.clone()))?;
    let level =
        (start_level + (current_controller_height - start_controller_height) / fillable.capacity_height).clamp(0.0, 1.0);
    ghost.fill_level = Some(level);
    Ok(level)
}

/// Sets the height factor; the box shrinks toward its fixed bottom face.
pub fn compress(ghost: &mut GhostObject, scene: &Scene, factor: f64) -> Result<(), GhostError> {
    let object = scene
        .object(&ghost.object_id)
        .ok_or_else(|| GhostError::UnknownObject(ghost.object_id.clone()))?;
    let c = object.compressible.ok_or_else(|| GhostError::NotCompressible(ghost.object_id.clone()))?;
    if !(c.min_height_factor..=1.0).contains(&factor) {
        return Err(GhostError::FactorOutOfRange { factor, min: c.min_height_factor });
    }
    ghost.height_factor = Some(factor);
    Ok(())
}
