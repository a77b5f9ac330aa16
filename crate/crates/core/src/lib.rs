//! Deterministic spatial-interaction engine for instructing robots through
//! life-size virtual twins ("ghosts") of real objects.
//!
//! The pipeline runs in this order:
//!
//! 1. [`scene`] holds the authoritative real world: anchored surfaces and
//!    physical objects, loaded from a canonical JSON file.
//! 2. [`selection`] turns controller strokes into single or lasso selections,
//!    using the ray and cone queries in [`geometry`].
//! 3. [`ghost`] spawns aligned twins for the selection and moves them rigidly
//!    while grabbed; fill and compress deformations live there too.
//! 4. On release, [`snap`] decides whether a ghost returns to its default pose
//!    along the arched trajectory; otherwise [`physics`] settles it onto a
//!    support surface.
//! 5. [`protocol`] diffs ghosts against the real scene and compiles robot
//!    instructions, which [`executor`] consumes as newline-delimited JSON.
//! 6. [`session`] owns the event loop that ties the steps above together, and
//!    [`service`] fans session changes out to live clients.

pub mod canon;
pub mod config;
pub mod executor;
pub mod geometry;
pub mod ghost;
pub mod math;
pub mod physics;
pub mod protocol;
pub mod scene;
pub mod selection;
pub mod service;
pub mod session;
pub mod snap;

pub use config::Config;
pub use geometry::{LassoVolume, Ray, SurfaceHit, TargetKind};
pub use ghost::{GhostObject, GhostPhase, GrabState};
pub use math::{BoxShape, Pose, Vec3, WorldBox};
pub use protocol::{Instruction, InstructionAction, RobotStatus, StatusState, WireMessage};
pub use scene::{PhysicalObject, Scene, SurfaceAnchor};
pub use selection::{SelectionMode, SelectionResult, Stroke};
pub use session::{ControllerEvent, EventKind, MenuAction, SessionMode, SessionState};
pub use snap::ArcTrajectory;
