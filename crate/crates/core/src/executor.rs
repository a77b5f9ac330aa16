//! Simulated robot. It validates each instruction against its own copy of the
//! real scene, plays a linear progress schedule, and lands every successful
//! instruction on its target exactly.
//!
//! The executor only talks in encoded lines: [`RobotExecutor::handle_line`]
//! is the whole interface, and [`spawn`] runs it on a thread behind a pair
//! of channels.

use std::sync::mpsc;
use std::thread;

use crate::math::{interpolate_pose, WorldBox};
use crate::physics::{Environment, PENETRATION_TOLERANCE};
use crate::protocol::{self, Instruction, InstructionAction, RobotStatus, StatusState, WireMessage};
use crate::scene::Scene;

pub const REASON_PENETRATION: &str = "penetration";
pub const REASON_SUPPORT: &str = "support";
pub const REASON_CAPABILITY: &str = "capability";
pub const REASON_RANGE: &str = "range";
pub const REASON_UNKNOWN_OBJECT: &str = "unknown_object";
pub const REASON_SEQUENCE: &str = "sequence";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ExecutorError {
    #[error("batch seq {got} where {expected} was expected")]
    NonContiguous { expected: u64, got: u64 },
}

/// Feasibility gate. `Err` carries the failure reason sent on the wire.
pub fn validate(instr: &Instruction, scene: &Scene) -> Result<(), &'static str> {
    let object = scene.object(&instr.object_id).ok_or(REASON_UNKNOWN_OBJECT)?;
    match &instr.action {
        InstructionAction::PickAndPlace { target_pose } => {
            if !object.graspable {
                return Err(REASON_CAPABILITY);
            }
            if target_pose.validate().is_err() {
                return Err(REASON_RANGE);
            }
            let target = WorldBox::with_height_factor(target_pose, &object.shape, object.height_factor());
            let env = Environment::for_object(&object.id, scene);
            if env.max_penetration(&target) > PENETRATION_TOLERANCE {
                return Err(REASON_PENETRATION);
            }
            if !env.is_resting(&target) {
                return Err(REASON_SUPPORT);
            }
        }
        InstructionAction::Fill { target_level } => {
            if object.fillable.is_none() {
                return Err(REASON_CAPABILITY);
            }
            if !(0.0..=1.0).contains(target_level) {
                return Err(REASON_RANGE);
            }
        }
        InstructionAction::Compress { target_factor } => {
            let c = object.compressible.ok_or(REASON_CAPABILITY)?;
            if !(c.min_height_factor..=1.0).contains(target_factor) {
                return Err(REASON_RANGE);
            }
        }
    }
    Ok(())
}

/// Writes the state at progress `s` into the scene; `s == 1.0` assigns the
/// target itself.
fn apply_progress(instr: &Instruction, scene: &mut Scene, start: &Scene, s: f64) {
    let Some(from) = start.object(&instr.object_id) else { return };
    let Some(object) = scene.object_mut(&instr.object_id) else { return };
    let exact = s >= 1.0;
    match &instr.action {
        InstructionAction::PickAndPlace { target_pose } => {
            object.pose = if exact { *target_pose } else { interpolate_pose(&from.pose, target_pose, s) };
        }
        InstructionAction::Fill { target_level } => {
            if let (Some(f), Some(f0)) = (object.fillable.as_mut(), from.fillable) {
                f.fill_level = if exact { *target_level } else { f0.fill_level + (target_level - f0.fill_level) * s };
            }
        }
        InstructionAction::Compress { target_factor } => {
            if let (Some(c), Some(c0)) = (object.compressible.as_mut(), from.compressible) {
                c.current_factor =
                    if exact { *target_factor } else { c0.current_factor + (target_factor - c0.current_factor) * s };
            }
        }
    }
}

/// Runs one instruction, calling `emit` with each status and the scene as it
/// stands at that status. A failed instruction leaves the scene untouched.
pub fn execute_one(instr: &Instruction, scene: &mut Scene, step_count: u32, mut emit: impl FnMut(RobotStatus, &Scene)) {
    let status = |state| RobotStatus { seq: instr.seq, state };
    emit(status(StatusState::Accepted), scene);
    if let Err(reason) = validate(instr, scene) {
        log::info!("seq {} on `{}` failed: {reason}", instr.seq, instr.object_id);
        emit(status(StatusState::Failed { reason: reason.to_string() }), scene);
        return;
    }
    let start = scene.clone();
    for k in 1..step_count {
        let progress = k as f64 / step_count as f64;
        apply_progress(instr, scene, &start, progress);
        emit(status(StatusState::InProgress { progress }), scene);
    }
    apply_progress(instr, scene, &start, 1.0);
    emit(status(StatusState::Done), scene);
}

/// Executes a whole batch in order with failure isolation.
pub fn execute_batch(batch: &[Instruction], scene: &Scene, step_count: u32) -> Result<(Scene, Vec<RobotStatus>), ExecutorError> {
    for (i, instr) in batch.iter().enumerate() {
        let expected = batch[0].seq + i as u64;
        if instr.seq != expected {
            return Err(ExecutorError::NonContiguous { expected, got: instr.seq });
        }
    }
    let mut scene = scene.clone();
    let mut log = Vec::new();
    for instr in batch {
        execute_one(instr, &mut scene, step_count, |s, _| log.push(s));
    }
    Ok((scene, log))
}

/// Line-level executor process state.
#[derive(Debug, Clone)]
pub struct RobotExecutor {
    scene: Scene,
    step_count: u32,
    last_seq: Option<u64>,
}

impl RobotExecutor {
    pub fn new(scene: Scene, step_count: u32) -> Self {
        Self { scene, step_count, last_seq: None }
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn into_scene(self) -> Scene {
        self.scene
    }

    /// Consumes one instruction line and returns the encoded status lines.
    /// A `seq` of 1 opens a new batch; otherwise it must follow the previous
    /// one. Undecodable lines and status lines are dropped with a warning.
    pub fn handle_line(&mut self, line: &str) -> Vec<String> {
        let instr = match protocol::decode(line) {
            Ok(WireMessage::Instruction(i)) => i,
            Ok(WireMessage::Status(_)) => {
                log::warn!("executor ignoring status line");
                return Vec::new();
            }
            Err(e) => {
                log::warn!("executor ignoring bad line: {e}");
                return Vec::new();
            }
        };
        let in_order = instr.seq == 1 || self.last_seq.is_some_and(|last| instr.seq == last + 1);
        if !in_order {
            let failed = RobotStatus { seq: instr.seq, state: StatusState::Failed { reason: REASON_SEQUENCE.into() } };
            return vec![failed.encode()];
        }
        self.last_seq = Some(instr.seq);
        let mut out = Vec::new();
        execute_one(&instr, &mut self.scene, self.step_count, |s, _| out.push(s.encode()));
        out
    }
}

/// Handle to an executor thread. Dropping `instructions` ends the thread,
/// whose join value is the executor's final scene.
pub struct ExecutorHandle {
    pub instructions: mpsc::Sender<String>,
    pub statuses: mpsc::Receiver<String>,
    pub thread: thread::JoinHandle<Scene>,
}

pub fn spawn(scene: Scene, step_count: u32) -> ExecutorHandle {
    let (instr_tx, instr_rx) = mpsc::channel::<String>();
    let (status_tx, status_rx) = mpsc::channel::<String>();
    let thread = thread::Builder::new()
        .name("robot-executor".into())
        .spawn(move || {
            let mut executor = RobotExecutor::new(scene, step_count);
            for line in instr_rx {
                for status in executor.handle_line(&line) {
                    if status_tx.send(status).is_err() {
                        return executor.into_scene();
                    }
                }
            }
            executor.into_scene()
        })
        .expect("spawn executor thread");
    ExecutorHandle { instructions: instr_tx, statuses: status_rx, thread }
}

/// Checks that each seq's statuses follow accepted → in_progress* →
/// (done | failed) and that progress values increase strictly in (0, 1).
pub fn check_status_order(log: &[RobotStatus]) -> Result<(), String> {
    use std::collections::BTreeMap;
    #[derive(PartialEq)]
    enum Stage {
        Accepted,
        Progress(f64),
        Finished,
    }
    let mut stages: BTreeMap<u64, Stage> = BTreeMap::new();
    for s in log {
        let prev = stages.get(&s.seq);
        let next = match (prev, &s.state) {
            (None, StatusState::Accepted) => Stage::Accepted,
            (None, StatusState::Failed { reason }) if reason == REASON_SEQUENCE => Stage::Finished,
            (Some(Stage::Accepted), StatusState::InProgress { progress }) if *progress > 0.0 && *progress < 1.0 => {
                Stage::Progress(*progress)
            }
            (Some(Stage::Progress(p)), StatusState::InProgress { progress }) if *progress > *p && *progress < 1.0 => {
                Stage::Progress(*progress)
            }
            (Some(Stage::Accepted | Stage::Progress(_)), StatusState::Done | StatusState::Failed { .. }) => {
                Stage::Finished
            }
            _ => return Err(format!("seq {}: unexpected `{}`", s.seq, s.state.name())),
        };
        stages.insert(s.seq, next);
    }
    match stages.iter().find(|(_, st)| **st != Stage::Finished) {
        Some((seq, _)) => Err(format!("seq {seq} never finished")),
        None => Ok(()),
    }
}
