//! Microscopic pedestrian dynamics.
//!
//! Scenarios ([`scenario`]) describe a topography of obstacles, sources and
//! targets. Arrival-time floor fields ([`floorfield`]) guide the agents of
//! one of three locomotion models: the optimal steps model ([`osm`]), the
//! social force model ([`sfm`]) and the behavioral heuristics model
//! ([`bhm`]). The [`engine`] runs the simulation loop and [`outputs`]
//! writes trajectories, measurements and run metadata.

pub mod agent;
pub mod bhm;
pub mod engine;
pub mod events;
pub mod floorfield;
pub mod format;
pub mod geometry;
pub mod osm;
pub mod outputs;
pub mod scenario;
pub mod sfm;
pub mod stepping;

pub use agent::{Agent, AgentId, Body, Heuristic};
pub use engine::{
    run_simulation, run_with_model, FrameRecorder, Frame, FrameSink, LocomotionModel, RunSummary, SimulationState,
};
pub use floorfield::{FloorField, GridSpec, ScalarGrid, SpeedField};
pub use geometry::{Point2, Shape, Vec2};
pub use outputs::{run_to_directory, RunMetadata, RunOptions};
pub use scenario::{parse_scenario, validate_scenario, Diagnostic, ModelName, Scenario, ScenarioError, Severity};

/// Package version and source revision of this build.
pub const BUILD_ID: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("CROWDKIT_SOURCE_REVISION"));
