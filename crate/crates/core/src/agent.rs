//! Per-agent state shared by the locomotion models.

use serde::{Deserialize, Serialize};

use crate::geometry::{Point2, Vec2};
use crate::scenario::EntityId;

pub type AgentId = u32;

/// Slack allowed on torso contact distances, absorbing rounding in the
/// position arithmetic.
pub const CONTACT_TOLERANCE: f64 = 1e-10;

/// Which rule a behavioral-heuristics agent follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Heuristic {
    #[default]
    StepOrWait,
    TangentialEvasion,
}

/// A simulated pedestrian.
///
/// The stepping models use `step_length` and `next_event_time`, the social
/// force model uses `velocity`; every model reads the common fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    /// Assigned in creation order starting at 1, never reused.
    pub id: AgentId,
    pub position: Point2,
    pub velocity: Vec2,
    pub radius: f64,
    pub free_flow_speed: f64,
    pub step_length: f64,
    pub next_event_time: f64,
    pub targets: Vec<EntityId>,
    pub target_index: usize,
    pub source_id: Option<EntityId>,
    pub spawn_time: f64,
    pub heuristic: Heuristic,
}

impl Agent {
    pub fn target_id(&self) -> Option<EntityId> {
        self.targets.get(self.target_index).copied()
    }

    pub fn body(&self) -> Body {
        Body {
            position: self.position,
            radius: self.radius,
        }
    }

    /// Time between two footsteps, constant over the agent's lifetime.
    pub fn step_duration(&self) -> f64 {
        step_duration(self.step_length, self.free_flow_speed)
    }
}

/// `s0 / v0`.
pub fn step_duration(step_length: f64, free_flow_speed: f64) -> f64 {
    step_length / free_flow_speed
}

/// The torso disc of another agent, as seen by the one deciding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Body {
    pub position: Point2,
    pub radius: f64,
}

/// Bodies of all agents other than `agents[skip]` whose centers lie within
/// `range` of `center`.
pub fn bodies_near(agents: &[Agent], skip: usize, center: Point2, range: f64) -> Vec<Body> {
    let range2 = range * range;
    agents
        .iter()
        .enumerate()
        .filter(|&(i, a)| i != skip && (a.position - center).norm_squared() <= range2)
        .map(|(_, a)| a.body())
        .collect()
}
