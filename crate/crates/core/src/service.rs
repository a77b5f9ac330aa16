//! Transport-agnostic core of the live service. Client lines and executor
//! status lines go in; outgoing JSON lines come out, tagged with a
//! monotonically increasing `rev`.
//!
//! Server messages: `snapshot`, `diff`, `selection`, `arc`, `instructions`,
//! `status`, plus `error` replies. Clients send controller events in trace
//! form, or `{"type":"resync"}` to get a fresh snapshot.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::canon;
use crate::config::Config;
use crate::math::Vec3;
use crate::protocol::{self, Instruction, WireMessage};
use crate::scene::Scene;
use crate::session::{ControllerEvent, SessionState};

/// Lines produced by one input.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outgoing {
    /// For every connected client.
    pub broadcast: Vec<String>,
    /// For the client that sent the input only.
    pub reply: Vec<String>,
    /// Encoded instruction lines for the executor.
    pub to_executor: Vec<String>,
}

fn points(ps: &[Vec3]) -> Value {
    Value::Array(ps.iter().map(|p| json!([p.x, p.y, p.z])).collect())
}

#[derive(Debug)]
pub struct ServiceCore {
    state: SessionState,
    rev: u64,
    ghosts_seen: BTreeMap<String, Value>,
    objects_seen: BTreeMap<String, Value>,
    mode_seen: &'static str,
    selection_seen: Option<Value>,
    drawing_seen: usize,
    arcs_seen: Value,
    instructions_sent: usize,
    statuses_sent: usize,
}

impl ServiceCore {
    pub fn new(scene: Scene, config: Config) -> Self {
        let state = SessionState::new(scene, config);
        let mut core = Self {
            objects_seen: Self::object_values(&state),
            mode_seen: state.mode().as_str(),
            state,
            rev: 0,
            ghosts_seen: BTreeMap::new(),
            selection_seen: None,
            drawing_seen: 0,
            arcs_seen: json!([]),
            instructions_sent: 0,
            statuses_sent: 0,
        };
        core.arcs_seen = core.arcs_value();
        core
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn rev(&self) -> u64 {
        self.rev
    }

    fn object_values(state: &SessionState) -> BTreeMap<String, Value> {
        let scene = state.scene.to_value();
        scene["objects"]
            .as_array()
            .map(|objs| objs.iter().map(|o| (o["id"].as_str().unwrap_or_default().to_string(), o.clone())).collect())
            .unwrap_or_default()
    }

    fn message(&mut self, ty: &str, mut body: Value) -> String {
        self.rev += 1;
        body["type"] = json!(ty);
        body["rev"] = json!(self.rev);
        canon::to_line(&body)
    }

    fn arcs_value(&self) -> Value {
        let n = self.state.config.arc_polyline_samples;
        Value::Array(
            self.state
                .arcs()
                .iter()
                .map(|(id, arc)| {
                    json!({
                        "object_id": id,
                        "polyline": points(&arc.polyline(n)),
                        "corridor_radius": self.state.config.corridor_radius,
                    })
                })
                .collect(),
        )
    }

    fn selection_value(&self) -> Option<Value> {
        self.state.selection().map(|s| {
            let boundary = s.lasso.as_ref().map(|l| points(l.boundary())).unwrap_or_else(|| json!([]));
            json!({ "mode": s.mode.as_str(), "object_ids": s.object_ids, "boundary": boundary })
        })
    }

    /// Full state at the current rev; sent on connect and resync. It does not
    /// advance `rev`, so other clients see no gap.
    pub fn snapshot(&self) -> String {
        let mut v = json!({
            "type": "snapshot",
            "rev": self.rev,
            "scene": self.state.scene.to_value(),
            "ghosts": self.state.ghosts_value(),
            "mode": self.state.mode().as_str(),
            "active_group": self.state.active_group(),
            "arcs": self.arcs_value(),
        });
        if let Some(s) = self.selection_value() {
            v["selection"] = s;
        }
        canon::to_line(&v)
    }

    /// Emits messages for whatever changed since the last call.
    fn publish(&mut self, out: &mut Outgoing) {
        let ghosts: BTreeMap<String, Value> =
            self.state.ghosts().map(|g| (g.object_id.clone(), g.to_value())).collect();
        let objects = Self::object_values(&self.state);
        let mode = self.state.mode().as_str();
        let changed: Vec<Value> =
            ghosts.iter().filter(|(id, v)| self.ghosts_seen.get(*id) != Some(*v)).map(|(_, v)| v.clone()).collect();
        let removed: Vec<&String> = self.ghosts_seen.keys().filter(|id| !ghosts.contains_key(*id)).collect();
        let moved: Vec<Value> =
            objects.iter().filter(|(id, v)| self.objects_seen.get(*id) != Some(*v)).map(|(_, v)| v.clone()).collect();
        if !changed.is_empty() || !removed.is_empty() || !moved.is_empty() || mode != self.mode_seen {
            let body = json!({
                "ghosts": changed,
                "removed_ghosts": removed,
                "objects": moved,
                "mode": mode,
                "active_group": self.state.active_group(),
            });
            let line = self.message("diff", body);
            out.broadcast.push(line);
        }
        self.ghosts_seen = ghosts;
        self.objects_seen = objects;
        self.mode_seen = mode;

        if let Some(stroke) = self.state.stroke() {
            let boundary = stroke.boundary_candidates();
            if boundary.len() != self.drawing_seen {
                self.drawing_seen = boundary.len();
                let body = json!({ "mode": "drawing", "object_ids": [], "boundary": points(&boundary) });
                let line = self.message("selection", body);
                out.broadcast.push(line);
            }
        } else {
            self.drawing_seen = 0;
        }
        let selection = self.selection_value();
        if selection != self.selection_seen {
            if let Some(body) = selection.clone() {
                let line = self.message("selection", body);
                out.broadcast.push(line);
            }
            self.selection_seen = selection;
        }

        let arcs = self.arcs_value();
        if arcs != self.arcs_seen {
            let line = self.message("arc", json!({ "arcs": arcs.clone() }));
            out.broadcast.push(line);
            self.arcs_seen = arcs;
        }

        let log = self.state.instruction_log();
        if log.len() > self.instructions_sent {
            let fresh: Vec<Instruction> = log[self.instructions_sent..].to_vec();
            self.instructions_sent = log.len();
            out.to_executor.extend(fresh.iter().map(Instruction::encode));
            let body = json!({ "instructions": fresh.iter().map(Instruction::to_value).collect::<Vec<_>>() });
            let line = self.message("instructions", body);
            out.broadcast.push(line);
        }

        let statuses = self.state.status_log()[self.statuses_sent..].to_vec();
        self.statuses_sent += statuses.len();
        for s in statuses {
            let line = self.message("status", json!({ "status": s.to_value() }));
            out.broadcast.push(line);
        }
    }

    fn error_reply(&self, message: String) -> Outgoing {
        let v = json!({ "type": "error", "rev": self.rev, "message": message });
        Outgoing { reply: vec![canon::to_line(&v)], ..Default::default() }
    }

    /// One text frame or line from a client.
    pub fn handle_client_line(&mut self, line: &str) -> Outgoing {
        let value: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => return self.error_reply(format!("malformed message: {e}")),
        };
        if value.get("type").and_then(Value::as_str) == Some("resync") {
            return Outgoing { reply: vec![self.snapshot()], ..Default::default() };
        }
        let event = match ControllerEvent::from_value(value) {
            Ok(e) => e,
            Err(e) => return self.error_reply(e.to_string()),
        };
        self.state.step(&event);
        let mut out = Outgoing::default();
        self.publish(&mut out);
        out
    }

    /// One encoded status line from the executor.
    pub fn handle_status_line(&mut self, line: &str) -> Outgoing {
        let mut out = Outgoing::default();
        match protocol::decode(line) {
            Ok(WireMessage::Status(s)) => {
                self.state.apply_status(&s);
                self.publish(&mut out);
            }
            Ok(WireMessage::Instruction(_)) => log::warn!("instruction line on the status channel ignored"),
            Err(e) => log::warn!("bad status line ignored: {e}"),
        }
        out
    }
}
