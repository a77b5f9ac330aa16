//! Single-owner event loop: controller events in, ghost edits and compiled
//! instruction batches out. Replay of a recorded trace is a pure function of
//! scene bytes, trace bytes and config.
//!
//! Trace line: `{"t":0.5,"kind":"pose_update","pose":{...}}`; other kinds are
//! `trigger_down`, `trigger_up` and `menu` (with `"action"`).

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::canon;
use crate::config::Config;
use crate::geometry::{self, first_hit, Ray};
use crate::ghost::{self, GhostObject, GhostPhase, GrabState};
use crate::math::{Pose, Vec3};
use crate::physics;
use crate::protocol::{self, Instruction, InstructionAction, RobotStatus, StatusState};
use crate::scene::{Scene, SceneError};
use crate::selection::{SelectionResult, Stroke};
use crate::snap::{self, ArcTrajectory};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MenuAction {
    SetDefault,
    BeginFill,
    EndFill,
    Commit,
    /// Extension: sets the height factor of compressible ghosts in the
    /// active group.
    Compress { factor: f64 },
}

impl MenuAction {
    pub fn as_str(&self) -> &'static str {
        match self {
            MenuAction::SetDefault => "set_default",
            MenuAction::BeginFill => "begin_fill",
            MenuAction::EndFill => "end_fill",
            MenuAction::Commit => "commit",
            MenuAction::Compress { .. } => "compress",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EventKind {
    PoseUpdate(Pose),
    TriggerDown,
    TriggerUp,
    Menu(MenuAction),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerEvent {
    pub time: f64,
    pub kind: EventKind,
}

#[derive(Debug, thiserror::Error)]
pub enum EventError {
    #[error("malformed event: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("invalid event: {0}")]
    Invalid(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EventWire {
    t: f64,
    kind: String,
    pose: Option<Pose>,
    action: Option<String>,
    factor: Option<f64>,
}

impl ControllerEvent {
    pub fn new(time: f64, kind: EventKind) -> Self {
        Self { time, kind }
    }

    pub fn from_value(value: Value) -> Result<Self, EventError> {
        let w: EventWire = serde_json::from_value(value)?;
        if !w.t.is_finite() {
            return Err(EventError::Invalid("time must be finite".into()));
        }
        let bad = |m: &str| Err(EventError::Invalid(m.to_string()));
        let kind = match (w.kind.as_str(), w.pose, w.action.as_deref(), w.factor) {
            ("pose_update", Some(p), None, None) => EventKind::PoseUpdate(p),
            ("trigger_down", None, None, None) => EventKind::TriggerDown,
            ("trigger_up", None, None, None) => EventKind::TriggerUp,
            ("menu", None, Some(a), factor) => EventKind::Menu(match (a, factor) {
                ("set_default", None) => MenuAction::SetDefault,
                ("begin_fill", None) => MenuAction::BeginFill,
                ("end_fill", None) => MenuAction::EndFill,
                ("commit", None) => MenuAction::Commit,
                ("compress", Some(factor)) => MenuAction::Compress { factor },
                _ => return bad(&format!("unknown menu action `{a}` or misplaced factor")),
            }),
            (k, ..) => return bad(&format!("fields do not match event kind `{k}`")),
        };
        Ok(Self { time: w.t, kind })
    }

    pub fn from_line(line: &str) -> Result<Self, EventError> {
        Self::from_value(serde_json::from_str(line)?)
    }

    pub fn to_value(&self) -> Value {
        let mut v = json!({ "t": self.time });
        match &self.kind {
            EventKind::PoseUpdate(p) => {
                v["kind"] = json!("pose_update");
                v["pose"] = canon::value_of(p);
            }
            EventKind::TriggerDown => v["kind"] = json!("trigger_down"),
            EventKind::TriggerUp => v["kind"] = json!("trigger_up"),
            EventKind::Menu(a) => {
                v["kind"] = json!("menu");
                v["action"] = json!(a.as_str());
                if let MenuAction::Compress { factor } = a {
                    v["factor"] = json!(factor);
                }
            }
        }
        v
    }

    pub fn to_line(&self) -> String {
        canon::to_line(&self.to_value())
    }
}

/// Parses a `.jsonl` trace; blank lines are skipped. Errors carry the
/// 1-based line number.
pub fn parse_trace(text: &str) -> Result<Vec<ControllerEvent>, (usize, EventError)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| ControllerEvent::from_line(l).map_err(|e| (i + 1, e)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SessionMode {
    Idle,
    Selecting,
    Manipulating,
    Filling,
}

impl SessionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SessionMode::Idle => "idle",
            SessionMode::Selecting => "selecting",
            SessionMode::Manipulating => "manipulating",
            SessionMode::Filling => "filling",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct FillDrag {
    object_id: String,
    start_height: f64,
    start_level: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionState {
    pub scene: Scene,
    pub config: Config,
    ghosts: BTreeMap<String, GhostObject>,
    controller: Option<Pose>,
    stroke: Option<Stroke>,
    grab: Option<GrabState>,
    arcs: BTreeMap<String, ArcTrajectory>,
    mode: SessionMode,
    selection: Option<SelectionResult>,
    active_group: Option<u64>,
    next_group_id: u64,
    fill: Option<FillDrag>,
    last_time: Option<f64>,
    instruction_log: Vec<Instruction>,
    pending: BTreeMap<u64, Instruction>,
    status_log: Vec<RobotStatus>,
    warnings: Vec<String>,
}

impl SessionState {
    pub fn new(scene: Scene, config: Config) -> Self {
        Self {
            scene,
            config,
            ghosts: BTreeMap::new(),
            controller: None,
            stroke: None,
            grab: None,
            arcs: BTreeMap::new(),
            mode: SessionMode::Idle,
            selection: None,
            active_group: None,
            next_group_id: 1,
            fill: None,
            last_time: None,
            instruction_log: Vec::new(),
            pending: BTreeMap::new(),
            status_log: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn mode(&self) -> SessionMode {
        self.mode
    }

    /// Ghosts ordered by object id.
    pub fn ghosts(&self) -> impl Iterator<Item = &GhostObject> {
        self.ghosts.values()
    }

    pub fn ghost(&self, object_id: &str) -> Option<&GhostObject> {
        self.ghosts.get(object_id)
    }

    pub fn stroke(&self) -> Option<&Stroke> {
        self.stroke.as_ref()
    }

    pub fn grab_state(&self) -> Option<&GrabState> {
        self.grab.as_ref()
    }

    /// Arc per grabbed ghost, from its grab-time center to its default.
    pub fn arcs(&self) -> &BTreeMap<String, ArcTrajectory> {
        &self.arcs
    }

    pub fn selection(&self) -> Option<&SelectionResult> {
        self.selection.as_ref()
    }

    pub fn active_group(&self) -> Option<u64> {
        self.active_group
    }

    pub fn controller(&self) -> Option<&Pose> {
        self.controller.as_ref()
    }

    /// Every committed batch, concatenated; each batch restarts at seq 1.
    pub fn instruction_log(&self) -> &[Instruction] {
        &self.instruction_log
    }

    pub fn status_log(&self) -> &[RobotStatus] {
        &self.status_log
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    fn up(&self) -> Vec3 {
        self.scene.up()
    }

    fn group_ids(&self, group_id: u64) -> Vec<String> {
        self.ghosts.values().filter(|g| g.group_id == group_id).map(|g| g.object_id.clone()).collect()
    }

    fn active_ids(&self) -> Vec<String> {
        self.active_group.map(|g| self.group_ids(g)).unwrap_or_default()
    }

    pub fn step(&mut self, event: &ControllerEvent) {
        if let Some(last) = self.last_time {
            if event.time.partial_cmp(&last).is_none_or(|o| o.is_lt()) {
                self.warn(format!("event at t={} precedes t={last}; ignored", event.time));
                return;
            }
        }
        self.last_time = Some(event.time);
        match &event.kind {
            EventKind::PoseUpdate(p) => self.on_pose(event.time, p),
            EventKind::TriggerDown => self.on_trigger_down(event.time),
            EventKind::TriggerUp => self.on_trigger_up(),
            EventKind::Menu(a) => self.on_menu(a),
        }
    }

    fn on_pose(&mut self, time: f64, pose: &Pose) {
        if let Err(e) = pose.validate() {
            self.warn(format!("pose_update at t={time} rejected: {e}"));
            return;
        }
        self.controller = Some(*pose);
        match self.mode {
            SessionMode::Idle => {}
            SessionMode::Selecting => {
                let stroke = self.stroke.as_mut().expect("selecting has a stroke");
                if let Err(e) = stroke.extend(Ray::from_pose(pose), time, &self.scene) {
                    log::debug!("stroke sample skipped: {e}");
                }
            }
            SessionMode::Manipulating => {
                let grab = self.grab.take().expect("manipulating has a grab");
                let mut group = self.take_group(grab.group_id);
                ghost::move_group(&grab, &mut group, pose);
                self.put_back(group);
                self.grab = Some(grab);
            }
            SessionMode::Filling => {
                let fill = self.fill.clone().expect("filling has a drag");
                let height = pose.position.dot(&self.up());
                if let Some(g) = self.ghosts.get_mut(&fill.object_id) {
                    if let Err(e) = ghost::set_fill_by_drag(g, &self.scene, fill.start_height, height, fill.start_level) {
                        log::debug!("fill drag ignored: {e}");
                    }
                }
            }
        }
    }

    fn take_group(&mut self, group_id: u64) -> Vec<GhostObject> {
        let ids = self.group_ids(group_id);
        ids.iter().filter_map(|id| self.ghosts.remove(id)).collect()
    }

    fn put_back(&mut self, group: Vec<GhostObject>) {
        for g in group {
            self.ghosts.insert(g.object_id.clone(), g);
        }
    }

    /// Ghost under the ray, unless a real box occludes it.
    fn pointed_ghost(&self, ray: &Ray) -> Option<String> {
        let hits = self.ghosts.values().filter_map(|g| {
            let b = g.world_box(&self.scene)?;
            geometry::ray_world_box(ray, &b).map(|(t, _)| (g.object_id.as_str(), geometry::TargetKind::Object, t))
        });
        let (id, _, t) = geometry::nearest(hits)?;
        match first_hit(ray, &self.scene) {
            Some(real) if real.t + geometry::TIE_TOLERANCE < t => None,
            _ => Some(id.to_string()),
        }
    }

    fn on_trigger_down(&mut self, time: f64) {
        if self.mode != SessionMode::Idle {
            self.warn(format!("trigger_down while {}; ignored", self.mode.as_str()));
            return;
        }
        let Some(controller) = self.controller else {
            self.warn("trigger_down before any controller pose; ignored".into());
            return;
        };
        let ray = Ray::from_pose(&controller);
        if let Some(id) = self.pointed_ghost(&ray) {
            let group_id = self.ghosts[&id].group_id;
            let mut group = self.take_group(group_id);
            let grab = ghost::grab(&mut group, &controller, &id).expect("pointed ghost is in its own group");
            let up = self.up();
            self.arcs = group
                .iter()
                .filter_map(|g| {
                    let default = self.scene.object(&g.object_id)?.default_pose;
                    let arc = ArcTrajectory::with_config(g.pose.position, default.position, &up, &self.config);
                    Some((g.object_id.clone(), arc))
                })
                .collect();
            self.put_back(group);
            self.grab = Some(grab);
            self.active_group = Some(group_id);
            self.mode = SessionMode::Manipulating;
        } else {
            self.stroke = Some(Stroke::begin(ray, time, &self.scene));
            self.mode = SessionMode::Selecting;
        }
    }

    fn on_trigger_up(&mut self) {
        match self.mode {
            SessionMode::Selecting => self.end_stroke(),
            SessionMode::Manipulating => self.release(),
            mode => self.warn(format!("trigger_up while {}; ignored", mode.as_str())),
        }
    }

    fn end_stroke(&mut self) {
        let stroke = self.stroke.take().expect("selecting has a stroke");
        self.mode = SessionMode::Idle;
        let result = stroke.end(&self.scene, &self.config);
        if result.is_empty() {
            self.active_group = None;
        } else {
            let group_id = self.next_group_id;
            self.next_group_id += 1;
            for id in &result.object_ids {
                if let Some(g) = self.ghosts.get_mut(id) {
                    g.group_id = group_id;
                } else if let Some(o) = self.scene.object(id) {
                    self.ghosts.insert(id.clone(), GhostObject::aligned_with(o, group_id));
                }
            }
            self.active_group = Some(group_id);
        }
        self.selection = Some(result);
    }

    /// Snaps first, then settles the remaining group members bottom-up.
    fn release(&mut self) {
        let grab = self.grab.take().expect("manipulating has a grab");
        let arcs = std::mem::take(&mut self.arcs);
        self.mode = SessionMode::Idle;
        let ids = self.group_ids(grab.group_id);
        let mut pending: Vec<String> = Vec::new();
        for id in &ids {
            let g = self.ghosts.get_mut(id).expect("group member");
            let start = grab.poses_at_grab[id].position;
            let moved = (g.pose.position - start).norm() > self.config.corridor_radius;
            let in_corridor = arcs
                .get(id)
                .is_some_and(|arc| snap::should_snap(&g.pose.position, arc, self.config.corridor_radius));
            if moved && in_corridor {
                snap::snap(g, &self.scene).expect("ghost object exists");
            } else {
                pending.push(id.clone());
            }
        }

        let up = self.up();
        let bottom = |g: &GhostObject, scene: &Scene| g.world_box(scene).map_or(0.0, |b| b.bottom_along(&up));
        pending.sort_by(|a, b| {
            bottom(&self.ghosts[a], &self.scene)
                .total_cmp(&bottom(&self.ghosts[b], &self.scene))
                .then_with(|| a.cmp(b))
        });
        for (i, id) in pending.iter().enumerate() {
            let still_pending = &pending[i + 1..];
            let others: Vec<GhostObject> = self
                .ghosts
                .values()
                .filter(|g| g.object_id != *id && !still_pending.contains(&g.object_id))
                .cloned()
                .collect();
            let ghost = &self.ghosts[id];
            let result = physics::settle_ignoring(ghost, &self.scene, &others, still_pending);
            let g = self.ghosts.get_mut(id).expect("group member");
            match result {
                Ok(pose) => g.pose = pose,
                Err(e) => {
                    g.pose = grab.poses_at_grab[id];
                    let msg = format!("release of `{id}` reverted: {e}");
                    g.phase = GhostPhase::Placed;
                    self.warn(msg);
                    continue;
                }
            }
            g.phase = GhostPhase::Placed;
        }
    }

    fn on_menu(&mut self, action: &MenuAction) {
        match action {
            MenuAction::Commit => self.commit(),
            MenuAction::SetDefault => self.set_default(),
            MenuAction::BeginFill => self.begin_fill(),
            MenuAction::EndFill => {
                if self.mode == SessionMode::Filling {
                    self.fill = None;
                    self.mode = SessionMode::Idle;
                } else {
                    self.warn(format!("end_fill while {}; ignored", self.mode.as_str()));
                }
            }
            MenuAction::Compress { factor } => self.compress(*factor),
        }
    }

    fn commit(&mut self) {
        if self.mode != SessionMode::Idle {
            self.warn(format!("commit while {}; ignored", self.mode.as_str()));
            return;
        }
        let ghosts: Vec<GhostObject> = self.ghosts.values().cloned().collect();
        match protocol::compile_instructions(&ghosts, &self.scene) {
            Ok(batch) => {
                self.pending = batch.iter().map(|i| (i.seq, i.clone())).collect();
                self.instruction_log.extend(batch);
            }
            Err(e) => self.warn(format!("commit failed: {e}")),
        }
    }

    fn set_default(&mut self) {
        if self.mode != SessionMode::Idle {
            self.warn(format!("set_default while {}; ignored", self.mode.as_str()));
            return;
        }
        let placed: Vec<GhostObject> = self
            .active_ids()
            .iter()
            .filter_map(|id| self.ghosts.get(id))
            .filter(|g| g.phase == GhostPhase::Placed)
            .cloned()
            .collect();
        if placed.is_empty() {
            self.warn("set_default with no placed ghost in the active group; ignored".into());
        }
        for g in &placed {
            snap::set_default(g, &mut self.scene).expect("placed ghost of a known object");
        }
    }

    fn begin_fill(&mut self) {
        if self.mode != SessionMode::Idle {
            self.warn(format!("begin_fill while {}; ignored", self.mode.as_str()));
            return;
        }
        let Some(controller) = self.controller else {
            self.warn("begin_fill before any controller pose; ignored".into());
            return;
        };
        let fillable: Vec<&GhostObject> = self
            .active_ids()
            .iter()
            .filter_map(|id| self.ghosts.get(id))
            .filter(|g| g.fill_level.is_some())
            .collect();
        let [target] = fillable.as_slice() else {
            let n = fillable.len();
            self.warn(format!("begin_fill needs exactly one fillable ghost selected, found {n}; ignored"));
            return;
        };
        self.fill = Some(FillDrag {
            object_id: target.object_id.clone(),
            start_height: controller.position.dot(&self.up()),
            start_level: target.fill_level.expect("fillable"),
        });
        self.mode = SessionMode::Filling;
    }

    fn compress(&mut self, factor: f64) {
        if self.mode != SessionMode::Idle {
            self.warn(format!("compress while {}; ignored", self.mode.as_str()));
            return;
        }
        let ids: Vec<String> =
            self.active_ids().into_iter().filter(|id| self.ghosts[id].height_factor.is_some()).collect();
        if ids.is_empty() {
            self.warn("compress with no compressible ghost selected; ignored".into());
        }
        for id in ids {
            let g = self.ghosts.get_mut(&id).expect("listed");
            if let Err(e) = ghost::compress(g, &self.scene, factor) {
                let msg = format!("compress of `{id}` rejected: {e}");
                self.warn(msg);
            }
        }
    }

    /// Records a robot status; `done` lands the instruction target on the
    /// real scene. This is the only path that moves physical objects.
    pub fn apply_status(&mut self, status: &RobotStatus) {
        self.status_log.push(status.clone());
        match &status.state {
            StatusState::Done => {
                let Some(instr) = self.pending.remove(&status.seq) else {
                    self.warn(format!("done for unknown seq {}", status.seq));
                    return;
                };
                apply_target(&instr, &mut self.scene);
            }
            StatusState::Failed { reason } => {
                self.pending.remove(&status.seq);
                self.warn(format!("seq {} failed: {reason}", status.seq));
            }
            _ => {}
        }
    }

    pub fn ghosts_value(&self) -> Value {
        Value::Array(self.ghosts.values().map(GhostObject::to_value).collect())
    }

    /// Canonical summary of everything that defines the session outcome.
    pub fn state_value(&self) -> Value {
        json!({
            "scene": self.scene.to_value(),
            "ghosts": self.ghosts_value(),
            "mode": self.mode.as_str(),
            "active_group": self.active_group,
            "instructions": self.instruction_log.iter().map(Instruction::to_value).collect::<Vec<_>>(),
            "statuses": self.status_log.iter().map(RobotStatus::to_value).collect::<Vec<_>>(),
            "warnings": self.warnings,
        })
    }

    /// SHA-256 over the canonical state document, hex encoded.
    pub fn digest(&self) -> String {
        let doc = canon::to_document(&self.state_value());
        Sha256::digest(doc.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Sets the object state named by a finished instruction.
pub fn apply_target(instr: &Instruction, scene: &mut Scene) {
    let Some(object) = scene.object_mut(&instr.object_id) else { return };
    match &instr.action {
        InstructionAction::PickAndPlace { target_pose } => object.pose = *target_pose,
        InstructionAction::Fill { target_level } => {
            if let Some(f) = object.fillable.as_mut() {
                f.fill_level = *target_level;
            }
        }
        InstructionAction::Compress { target_factor } => {
            if let Some(c) = object.compressible.as_mut() {
                c.current_factor = *target_factor;
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("trace line {line}: {source}")]
    Trace { line: usize, source: EventError },
}

#[derive(Debug)]
pub struct ReplayOutput {
    pub state: SessionState,
    pub digest: String,
}

impl ReplayOutput {
    pub fn instructions(&self) -> &[Instruction] {
        self.state.instruction_log()
    }

    pub fn instructions_jsonl(&self) -> String {
        protocol::encode_batch(self.instructions())
    }
}

pub fn replay_events(scene: Scene, events: &[ControllerEvent], config: &Config) -> ReplayOutput {
    let mut state = SessionState::new(scene, config.clone());
    for e in events {
        state.step(e);
    }
    let digest = state.digest();
    ReplayOutput { state, digest }
}

pub fn replay(scene_text: &str, trace_text: &str, config: &Config) -> Result<ReplayOutput, ReplayError> {
    let scene = Scene::from_json(scene_text)?;
    let events = parse_trace(trace_text).map_err(|(line, source)| ReplayError::Trace { line, source })?;
    Ok(replay_events(scene, &events, config))
}
