//! Behavioral heuristics model.
//!
//! Agents take full footsteps along the floor field descent direction on
//! the same event schedule as the optimal steps model. A step that would
//! collide is either skipped (step or wait) or replaced by a sidestep at a
//! right angle, left first (tangential evasion).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agent::{Agent, Body, Heuristic, CONTACT_TOLERANCE};
use crate::floorfield::FloorField;
use crate::geometry::{point_segment_distance, Point2};
use crate::scenario::{EntityId, Topography};
use crate::stepping::StepRule;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct BhmParams {
    /// Heuristic of agents not covered by `source_heuristics`.
    pub heuristic: Heuristic,
    /// Heuristic per spawning source id.
    pub source_heuristics: BTreeMap<EntityId, Heuristic>,
}

impl BhmParams {
    pub fn heuristic_for(&self, source: Option<EntityId>) -> Heuristic {
        source
            .and_then(|s| self.source_heuristics.get(&s).copied())
            .unwrap_or(self.heuristic)
    }
}

/// Whether a disc of radius `radius` sweeping from `from` to `to` keeps
/// `radius + r_i` from every neighbor center and `radius` from every
/// obstacle, ending inside the bounds.
pub fn collision_free(from: Point2, to: Point2, radius: f64, neighbors: &[Body], topo: &Topography) -> bool {
    topo.bounds.contains(to)
        && neighbors
            .iter()
            .all(|n| point_segment_distance(n.position, from, to) >= radius + n.radius - CONTACT_TOLERANCE)
        && topo
            .obstacles
            .iter()
            .all(|o| o.segment_distance(from, to) >= radius)
}

/// Footstep of the behavioral heuristics model.
pub fn next_position(agent: &Agent, neighbors: &[Body], ff: &FloorField, topo: &Topography) -> Point2 {
    let x = agent.position;
    let e = ff.descent_direction(x).unwrap_or(Point2::ZERO);
    if e == Point2::ZERO {
        return x;
    }
    let ahead = x + e * agent.step_length;
    if collision_free(x, ahead, agent.radius, neighbors, topo) {
        return ahead;
    }
    if agent.heuristic == Heuristic::TangentialEvasion {
        for side in [e.perp(), -e.perp()] {
            let p = x + side * agent.step_length;
            if collision_free(x, p, agent.radius, neighbors, topo) {
                return p;
            }
        }
    }
    x
}

#[derive(Debug, Clone, Default)]
pub struct BhmRule;

impl StepRule for BhmRule {
    fn interaction_range(&self, agent: &Agent) -> f64 {
        agent.step_length + 4.0 * agent.radius
    }

    fn next_position(&self, agent: &Agent, neighbors: &[Body], ff: &FloorField, topo: &Topography) -> Point2 {
        next_position(agent, neighbors, ff, topo)
    }
}
