//! Python bindings. Structured values cross the boundary as canonical JSON
//! text, so Python callers use `json.loads` on the results.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ghost_core::executor::RobotExecutor;
use ghost_core::geometry::{first_hit as core_first_hit, Ray as CoreRay};
use ghost_core::ghost::GhostObject;
use ghost_core::math::Vec3;
use ghost_core::protocol;
use ghost_core::session::{self, ControllerEvent, SessionState};
use ghost_core::snap::ArcTrajectory;
use ghost_core::{Config, Scene as CoreScene};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn config_from(config_json: Option<&str>) -> PyResult<Config> {
    config_json.map_or_else(|| Ok(Config::default()), |c| Config::from_json(c).map_err(value_error))
}

fn vec3(v: [f64; 3]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

type PoseTuple = ([f64; 3], [f64; 4]);

#[pyclass(name = "Scene")]
struct PyScene {
    inner: CoreScene,
}

#[pymethods]
impl PyScene {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        CoreScene::from_json(text).map(|inner| Self { inner }).map_err(value_error)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn object_ids(&self) -> Vec<String> {
        self.inner.objects.iter().map(|o| o.id.clone()).collect()
    }

    fn anchor_ids(&self) -> Vec<String> {
        self.inner.anchors.iter().map(|a| a.id.clone()).collect()
    }

    /// `((x, y, z), (w, x, y, z))` of an object's current pose.
    fn object_pose(&self, object_id: &str) -> PyResult<PoseTuple> {
        let o = self.inner.object(object_id).ok_or_else(|| value_error(format!("unknown object `{object_id}`")))?;
        Ok((o.pose.position.into(), o.pose.wxyz()))
    }

    fn default_pose(&self, object_id: &str) -> PyResult<PoseTuple> {
        let o = self.inner.object(object_id).ok_or_else(|| value_error(format!("unknown object `{object_id}`")))?;
        Ok((o.default_pose.position.into(), o.default_pose.wxyz()))
    }

    /// First object or anchor hit: `(id, kind, t)` or `None`.
    fn first_hit(&self, origin: [f64; 3], direction: [f64; 3]) -> PyResult<Option<(String, String, f64)>> {
        let ray = CoreRay::new(vec3(origin), vec3(direction)).map_err(value_error)?;
        Ok(core_first_hit(&ray, &self.inner).map(|h| {
            let kind = match h.kind {
                ghost_core::TargetKind::Object => "object",
                ghost_core::TargetKind::Anchor => "anchor",
            };
            (h.target_id, kind.to_string(), h.t)
        }))
    }

    /// Rest pose for `object_id` released at the given pose.
    fn settle(&self, object_id: &str, position: [f64; 3], orientation: [f64; 4]) -> PyResult<PoseTuple> {
        let o = self.inner.object(object_id).ok_or_else(|| value_error(format!("unknown object `{object_id}`")))?;
        let mut ghost = GhostObject::aligned_with(o, 0);
        ghost.pose = ghost_core::Pose::from_arrays(position, orientation);
        ghost.pose.validate().map_err(value_error)?;
        let pose = ghost_core::physics::settle(&ghost, &self.inner, &[]).map_err(value_error)?;
        Ok((pose.position.into(), pose.wxyz()))
    }
}

#[pyclass(name = "Session")]
struct PySession {
    inner: SessionState,
}

#[pymethods]
impl PySession {
    #[new]
    #[pyo3(signature = (scene, config_json=None))]
    fn new(scene: &PyScene, config_json: Option<&str>) -> PyResult<Self> {
        Ok(Self { inner: SessionState::new(scene.inner.clone(), config_from(config_json)?) })
    }

    /// Applies one trace-format event line.
    fn step(&mut self, event_line: &str) -> PyResult<()> {
        let event = ControllerEvent::from_line(event_line).map_err(value_error)?;
        self.inner.step(&event);
        Ok(())
    }

    /// Applies one encoded robot status line.
    fn apply_status(&mut self, status_line: &str) -> PyResult<()> {
        match protocol::decode(status_line).map_err(value_error)? {
            protocol::WireMessage::Status(s) => {
                self.inner.apply_status(&s);
                Ok(())
            }
            protocol::WireMessage::Instruction(_) => Err(value_error("expected a status line")),
        }
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.mode().as_str()
    }

    fn ghosts_json(&self) -> String {
        ghost_core::canon::to_line(&self.inner.ghosts_value())
    }

    fn scene(&self) -> PyScene {
        PyScene { inner: self.inner.scene.clone() }
    }

    fn instructions_jsonl(&self) -> String {
        protocol::encode_batch(self.inner.instruction_log())
    }

    /// Instructions the current ghosts would compile to right now.
    fn pending_diff_jsonl(&self) -> PyResult<String> {
        let ghosts: Vec<GhostObject> = self.inner.ghosts().cloned().collect();
        let batch = protocol::compile_instructions(&ghosts, &self.inner.scene).map_err(value_error)?;
        Ok(protocol::encode_batch(&batch))
    }

    fn warnings(&self) -> Vec<String> {
        self.inner.warnings().to_vec()
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }
}

/// Replays a trace: `(instructions_jsonl, digest)`.
#[pyfunction]
#[pyo3(signature = (scene_json, trace_jsonl, config_json=None))]
fn replay(scene_json: &str, trace_jsonl: &str, config_json: Option<&str>) -> PyResult<(String, String)> {
    let out = session::replay(scene_json, trace_jsonl, &config_from(config_json)?).map_err(value_error)?;
    Ok((out.instructions_jsonl(), out.digest))
}

/// Runs instruction lines through the simulated robot:
/// `(status_jsonl, final_scene_json)`.
#[pyfunction]
#[pyo3(signature = (scene, instructions_jsonl, step_count=4))]
fn execute(scene: &PyScene, instructions_jsonl: &str, step_count: u32) -> PyResult<(String, String)> {
    let mut executor = RobotExecutor::new(scene.inner.clone(), step_count);
    let mut statuses = String::new();
    for line in instructions_jsonl.lines().filter(|l| !l.trim().is_empty()) {
        for s in executor.handle_line(line) {
            statuses.push_str(&s);
            statuses.push('\n');
        }
    }
    Ok((statuses, executor.into_scene().to_json()))
}

/// Closest point on the default arc: `(t, distance)`.
#[pyfunction]
#[pyo3(signature = (start, end, point, min_apex=0.3, apex_ratio=0.25))]
fn distance_to_arc(start: [f64; 3], end: [f64; 3], point: [f64; 3], min_apex: f64, apex_ratio: f64) -> (f64, f64) {
    let arc = ArcTrajectory::new(vec3(start), vec3(end), &Vec3::y(), min_apex, apex_ratio);
    arc.distance_to(&vec3(point))
}

/// Decodes a wire line and re-encodes it canonically.
#[pyfunction]
fn canonical_line(line: &str) -> PyResult<String> {
    protocol::decode(line).map(|m| m.encode()).map_err(value_error)
}

#[pymodule]
fn ghostobjects(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyScene>()?;
    m.add_class::<PySession>()?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(execute, m)?)?;
    m.add_function(wrap_pyfunction!(distance_to_arc, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_line, m)?)?;
    Ok(())
}
