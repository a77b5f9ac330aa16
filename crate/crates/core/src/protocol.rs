//! Robot instructions compiled from ghost/real differences, and their
//! newline-delimited JSON wire form.
//!
//! Instruction line:
//! `{"kind":"pick_and_place","object_id":"b1","seq":1,"target_pose":{...},"type":"instruction","v":1}`
//! (`target_level` for `fill`, `target_factor` for `compress`).
//!
//! Status line:
//! `{"progress":0.25,"seq":1,"state":"in_progress","type":"status","v":1}`
//! (`reason` only on `failed`, `progress` only on `in_progress`).

use std::collections::VecDeque;

use serde::Deserialize;
use serde_json::{json, Value};

use crate::canon;
use crate::ghost::{GhostObject, GhostPhase};
use crate::math::{Pose, WorldBox};
use crate::scene::Scene;

pub const WIRE_VERSION: u64 = 1;

/// Pose or state differences at or below this are treated as noise.
pub const CHANGE_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum InstructionAction {
    PickAndPlace { target_pose: Pose },
    Fill { target_level: f64 },
    Compress { target_factor: f64 },
}

impl InstructionAction {
    pub fn kind(&self) -> &'static str {
        match self {
            InstructionAction::PickAndPlace { .. } => "pick_and_place",
            InstructionAction::Fill { .. } => "fill",
            InstructionAction::Compress { .. } => "compress",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instruction {
    pub seq: u64,
    pub object_id: String,
    pub action: InstructionAction,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StatusState {
    Accepted,
    InProgress { progress: f64 },
    Done,
    Failed { reason: String },
}

impl StatusState {
    pub fn name(&self) -> &'static str {
        match self {
            StatusState::Accepted => "accepted",
            StatusState::InProgress { .. } => "in_progress",
            StatusState::Done => "done",
            StatusState::Failed { .. } => "failed",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, StatusState::Done | StatusState::Failed { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobotStatus {
    pub seq: u64,
    pub state: StatusState,
}

#[derive(Clone, Debug, PartialEq)]
pub enum WireMessage {
    Instruction(Instruction),
    Status(RobotStatus),
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed line: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported wire version {0:?}")]
    UnsupportedVersion(Option<Value>),
    #[error("unknown message type {0:?}")]
    UnknownType(Option<Value>),
    #[error("invalid message: {0}")]
    Invalid(String),
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CompileError {
    #[error("ghost `{0}` is still grabbed")]
    GhostGrabbed(String),
    #[error("ghost refers to unknown object `{0}`")]
    UnknownObject(String),
}

fn differs(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() > CHANGE_THRESHOLD,
        _ => false,
    }
}

/// Diffs ghosts against the scene and orders the resulting tasks:
/// pick-and-place bottom-up by target support height, then fills, then
/// compressions. Sequence numbers run `1..=n`.
pub fn compile_instructions(ghosts: &[GhostObject], scene: &Scene) -> Result<Vec<Instruction>, CompileError> {
    let up = scene.up();
    let mut moves: Vec<(f64, String, Pose)> = Vec::new();
    let mut fills: Vec<(String, f64)> = Vec::new();
    let mut compressions: Vec<(String, f64)> = Vec::new();
    for g in ghosts {
        if g.phase == GhostPhase::Grabbed {
            return Err(CompileError::GhostGrabbed(g.object_id.clone()));
        }
        let object = scene.object(&g.object_id).ok_or_else(|| CompileError::UnknownObject(g.object_id.clone()))?;
        if g.pose.translation_distance(&object.pose) > CHANGE_THRESHOLD
            || g.pose.rotation_angle_to(&object.pose) > CHANGE_THRESHOLD
        {
            let target_box = WorldBox::with_height_factor(&g.pose, &object.shape, g.height_factor.unwrap_or(1.0));
            moves.push((target_box.bottom_along(&up), g.object_id.clone(), g.pose));
        }
        if differs(g.fill_level, object.fill_level()) {
            fills.push((g.object_id.clone(), g.fill_level.expect("checked")));
        }
        if differs(g.height_factor, object.compressible.map(|c| c.current_factor)) {
            compressions.push((g.object_id.clone(), g.height_factor.expect("checked")));
        }
    }
    moves.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    fills.sort_by(|a, b| a.0.cmp(&b.0));
    compressions.sort_by(|a, b| a.0.cmp(&b.0));

    let actions = moves
        .into_iter()
        .map(|(_, id, target_pose)| (id, InstructionAction::PickAndPlace { target_pose }))
        .chain(fills.into_iter().map(|(id, target_level)| (id, InstructionAction::Fill { target_level })))
        .chain(compressions.into_iter().map(|(id, target_factor)| (id, InstructionAction::Compress { target_factor })));
    Ok(actions
        .enumerate()
        .map(|(i, (object_id, action))| Instruction { seq: i as u64 + 1, object_id, action })
        .collect())
}

impl Instruction {
    pub fn to_value(&self) -> Value {
        let mut v = json!({
            "v": WIRE_VERSION,
            "type": "instruction",
            "seq": self.seq,
            "kind": self.action.kind(),
            "object_id": self.object_id,
        });
        match &self.action {
            InstructionAction::PickAndPlace { target_pose } => v["target_pose"] = canon::value_of(target_pose),
            InstructionAction::Fill { target_level } => v["target_level"] = json!(target_level),
            InstructionAction::Compress { target_factor } => v["target_factor"] = json!(target_factor),
        }
        v
    }

    pub fn encode(&self) -> String {
        canon::to_line(&self.to_value())
    }
}

impl RobotStatus {
    pub fn to_value(&self) -> Value {
        let mut v = json!({
            "v": WIRE_VERSION,
            "type": "status",
            "seq": self.seq,
            "state": self.state.name(),
        });
        match &self.state {
            StatusState::InProgress { progress } => v["progress"] = json!(progress),
            StatusState::Failed { reason } => v["reason"] = json!(reason),
            _ => {}
        }
        v
    }

    pub fn encode(&self) -> String {
        canon::to_line(&self.to_value())
    }
}

impl WireMessage {
    pub fn encode(&self) -> String {
        match self {
            WireMessage::Instruction(i) => i.encode(),
            WireMessage::Status(s) => s.encode(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstructionWire {
    #[allow(dead_code)]
    v: u64,
    #[serde(rename = "type")]
    #[allow(dead_code)]
    ty: String,
    seq: u64,
    kind: String,
    object_id: String,
    target_pose: Option<Pose>,
    target_level: Option<f64>,
    target_factor: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StatusWire {
    #[allow(dead_code)]
    v: u64,
    #[serde(rename = "type")]
    #[allow(dead_code)]
    ty: String,
    seq: u64,
    state: String,
    progress: Option<f64>,
    reason: Option<String>,
}

fn invalid(msg: impl Into<String>) -> ProtocolError {
    ProtocolError::Invalid(msg.into())
}

fn decode_instruction(value: Value) -> Result<Instruction, ProtocolError> {
    let w: InstructionWire = serde_json::from_value(value)?;
    if w.seq == 0 {
        return Err(invalid("seq must be at least 1"));
    }
    let action = match (w.kind.as_str(), w.target_pose, w.target_level, w.target_factor) {
        ("pick_and_place", Some(target_pose), None, None) => {
            target_pose.validate().map_err(invalid)?;
            InstructionAction::PickAndPlace { target_pose }
        }
        ("fill", None, Some(target_level), None) => InstructionAction::Fill { target_level },
        ("compress", None, None, Some(target_factor)) => InstructionAction::Compress { target_factor },
        (kind, ..) => return Err(invalid(format!("fields do not match instruction kind `{kind}`"))),
    };
    Ok(Instruction { seq: w.seq, object_id: w.object_id, action })
}

fn decode_status(value: Value) -> Result<RobotStatus, ProtocolError> {
    let w: StatusWire = serde_json::from_value(value)?;
    let state = match (w.state.as_str(), w.progress, w.reason) {
        ("accepted", None, None) => StatusState::Accepted,
        ("in_progress", Some(progress), None) => StatusState::InProgress { progress },
        ("done", None, None) => StatusState::Done,
        ("failed", None, Some(reason)) => StatusState::Failed { reason },
        (state, ..) => return Err(invalid(format!("fields do not match status state `{state}`"))),
    };
    Ok(RobotStatus { seq: w.seq, state })
}

/// Decodes one line (with or without its trailing newline).
pub fn decode(line: &str) -> Result<WireMessage, ProtocolError> {
    let value: Value = serde_json::from_str(line.trim_end_matches(['\n', '\r']))?;
    match value.get("v") {
        Some(v) if v.as_u64() == Some(WIRE_VERSION) => {}
        other => return Err(ProtocolError::UnsupportedVersion(other.cloned())),
    }
    match value.get("type").and_then(Value::as_str) {
        Some("instruction") => decode_instruction(value).map(WireMessage::Instruction),
        Some("status") => decode_status(value).map(WireMessage::Status),
        _ => Err(ProtocolError::UnknownType(value.get("type").cloned())),
    }
}

pub fn encode_batch(batch: &[Instruction]) -> String {
    batch.iter().map(|i| i.encode() + "\n").collect()
}

pub fn encode_statuses(statuses: &[RobotStatus]) -> String {
    statuses.iter().map(|s| s.encode() + "\n").collect()
}

/// Incremental line splitter for a byte stream. Incomplete trailing data
/// stays buffered until its newline arrives, and a bad line never consumes
/// the lines after it.
#[derive(Debug, Default)]
pub struct LineBuffer {
    pending: String,
    lines: VecDeque<String>,
}

impl LineBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, chunk: &str) {
        self.pending.push_str(chunk);
        while let Some(pos) = self.pending.find('\n') {
            let line: String = self.pending.drain(..=pos).collect();
            let line = line.trim_end_matches(['\n', '\r']);
            if !line.trim().is_empty() {
                self.lines.push_back(line.to_string());
            }
        }
    }

    /// Next complete line, decoded.
    pub fn next_message(&mut self) -> Option<Result<WireMessage, ProtocolError>> {
        self.lines.pop_front().map(|l| decode(&l))
    }

    /// Bytes received after the last complete line.
    pub fn pending(&self) -> &str {
        &self.pending
    }
}

/// Decodes every non-empty line of a `.jsonl` document.
pub fn decode_all(text: &str) -> Result<Vec<WireMessage>, (usize, ProtocolError)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| decode(l).map_err(|e| (i + 1, e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;

    fn pick() -> Instruction {
        Instruction {
            seq: 1,
            object_id: "b1".into(),
            action: InstructionAction::PickAndPlace {
                target_pose: Pose::from_translation(Vec3::new(1.36, 0.15, 0.72)),
            },
        }
    }

    #[test]
    fn pick_and_place_round_trips() {
        let i = pick();
        assert_eq!(decode(&i.encode()).unwrap(), WireMessage::Instruction(i));
    }

    #[test]
    fn encoding_is_canonical() {
        assert_eq!(
            pick().encode(),
            r#"{"kind":"pick_and_place","object_id":"b1","seq":1,"target_pose":{"orientation":[1.0,0.0,0.0,0.0],"position":[1.3600000000000001,0.14999999999999999,0.71999999999999997]},"type":"instruction","v":1}"#
        );
        let s = RobotStatus { seq: 3, state: StatusState::InProgress { progress: 0.25 } };
        assert_eq!(s.encode(), r#"{"progress":0.25,"seq":3,"state":"in_progress","type":"status","v":1}"#);
    }

    #[test]
    fn unknown_version_rejected() {
        let line = pick().encode().replace("\"v\":1", "\"v\":2");
        assert!(matches!(decode(&line), Err(ProtocolError::UnsupportedVersion(_))));
        let line = pick().encode().replace(",\"v\":1", "");
        assert!(matches!(decode(&line), Err(ProtocolError::UnsupportedVersion(None))));
    }

    #[test]
    fn mismatched_kind_fields_rejected() {
        let line = r#"{"kind":"fill","object_id":"b","seq":1,"target_factor":0.5,"type":"instruction","v":1}"#;
        assert!(matches!(decode(line), Err(ProtocolError::Invalid(_))));
    }

    #[test]
    fn extra_field_rejected() {
        let line = r#"{"seq":1,"state":"done","type":"status","v":1,"x":0}"#;
        assert!(matches!(decode(line), Err(ProtocolError::Malformed(_))));
    }

    #[test]
    fn truncated_line_errors_and_stream_continues() {
        let good = pick().encode();
        let mut buf = LineBuffer::new();
        buf.push(&format!("{}\n{}\n", &good[..20], good));
        buf.push(&good[..30]);
        assert!(matches!(buf.next_message(), Some(Err(ProtocolError::Malformed(_)))));
        assert_eq!(buf.next_message().unwrap().unwrap(), WireMessage::Instruction(pick()));
        assert!(buf.next_message().is_none());
        assert_eq!(buf.pending(), &good[..30]);
        buf.push(&format!("{}\n", &good[30..]));
        assert_eq!(buf.next_message().unwrap().unwrap(), WireMessage::Instruction(pick()));
    }
}
