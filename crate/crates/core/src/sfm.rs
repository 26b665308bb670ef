//! Social force model.
//!
//! Each agent relaxes toward its desired velocity `v0 * e` with time
//! constant `tau`, is pushed away from other agents and obstacles by
//! exponential repulsions, and optionally receives a Gaussian fluctuation.
//! The equations of motion are integrated with explicit Euler steps of
//! fixed length `dt`; velocities are capped at `vMaxFactor * v0`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::Agent;
use crate::engine::{LocomotionModel, SimulationState};
use crate::floorfield::FloorField;
use crate::geometry::{Point2, Vec2};
use crate::scenario::{EntityId, Topography};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct SfmParams {
    /// Relaxation time, in seconds.
    pub tau: f64,
    pub v_max_factor: f64,
    /// Agent repulsion strength `A`, in m/s^2.
    pub repulsion_strength: f64,
    /// Agent repulsion range `B`, in meters.
    pub repulsion_range: f64,
    pub obstacle_strength: f64,
    pub obstacle_range: f64,
    /// Per-axis standard deviation of the fluctuating acceleration.
    pub fluctuation_sd: f64,
    /// Integration step, in seconds.
    pub dt: f64,
}

impl Default for SfmParams {
    fn default() -> Self {
        SfmParams {
            tau: 0.5,
            v_max_factor: 1.3,
            repulsion_strength: 2.1,
            repulsion_range: 0.3,
            obstacle_strength: 10.0,
            obstacle_range: 0.2,
            fluctuation_sd: 0.0,
            dt: 0.01,
        }
    }
}

impl SfmParams {
    pub fn problems(&self) -> Vec<String> {
        let positive = [
            ("tau", self.tau),
            ("vMaxFactor", self.v_max_factor),
            ("repulsionStrength", self.repulsion_strength),
            ("repulsionRange", self.repulsion_range),
            ("obstacleStrength", self.obstacle_strength),
            ("obstacleRange", self.obstacle_range),
            ("dt", self.dt),
        ];
        let mut out: Vec<String> = positive
            .iter()
            .filter(|(_, v)| !(*v > 0.0 && v.is_finite()))
            .map(|(k, _)| format!("{k} must be positive"))
            .collect();
        if !(self.fluctuation_sd >= 0.0) {
            out.push("fluctuationSd must not be negative".to_owned());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SfmError {
    #[error("agent at {0} is inside an obstacle")]
    InsideObstacle(Point2),
}

/// Desired walking direction: the normalized negative floor field
/// gradient, zero on the target plateau or where the field is undefined.
pub fn target_direction(ff: &FloorField, x: Point2) -> Vec2 {
    ff.descent_direction(x).unwrap_or(Point2::ZERO)
}

/// `(v0 * e - velocity) / tau`.
pub fn driving_force(velocity: Vec2, free_flow_speed: f64, e: Vec2, params: &SfmParams) -> Vec2 {
    (e * free_flow_speed - velocity) / params.tau
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce5_e4b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Direction assigned to a coincident pair, pointing away from the agent
/// with the larger id.
fn coincident_direction(a: u32, b: u32) -> Vec2 {
    let (lo, hi) = (a.min(b), a.max(b));
    let h = mix(((lo as u64) << 32) | hi as u64);
    let angle = (h >> 11) as f64 / (1u64 << 53) as f64 * std::f64::consts::TAU;
    let dir = Point2::from_polar(1.0, angle);
    if a == lo {
        dir
    } else {
        -dir
    }
}

/// Repulsion `other` exerts on `agent`: `A * exp((r_a + r_o - d) / B)` along
/// the unit vector from `other` to `agent`.
pub fn agent_repulsion(agent: &Agent, other: &Agent, params: &SfmParams) -> Vec2 {
    let diff = agent.position - other.position;
    let d = diff.norm();
    let magnitude = params.repulsion_strength * ((agent.radius + other.radius - d) / params.repulsion_range).exp();
    let dir = if d > 1e-12 {
        diff / d
    } else {
        coincident_direction(agent.id, other.id)
    };
    dir * magnitude
}

/// Sum of the obstacle repulsions at `x` for an agent of radius `radius`.
pub fn obstacle_repulsion(x: Point2, radius: f64, topo: &Topography, params: &SfmParams) -> Result<Vec2, SfmError> {
    let mut total = Point2::ZERO;
    for o in &topo.obstacles {
        if o.contains_point(x) {
            return Err(SfmError::InsideObstacle(x));
        }
        let closest = o.closest_boundary_point(x);
        let diff = x - closest;
        let d = diff.norm();
        let magnitude = params.obstacle_strength * ((radius - d) / params.obstacle_range).exp();
        total += diff / d * magnitude;
    }
    Ok(total)
}

/// Rescales `w` to length `v_max` if it is longer.
pub fn clamp_speed(w: Vec2, v_max: f64) -> Vec2 {
    let n = w.norm();
    if n > v_max {
        w * (v_max / n)
    } else {
        w
    }
}

/// Beyond this many ranges past contact an agent repulsion is below
/// `A * 1e-8` and is skipped.
const CUTOFF_RANGES: f64 = 18.0;

/// One explicit Euler step of all agents. Forces are computed from the
/// state at the start of the step; the update is then committed in id order.
pub fn sfm_step<R: Rng + ?Sized>(
    agents: &mut [Agent],
    fields: &BTreeMap<EntityId, FloorField>,
    topo: &Topography,
    params: &SfmParams,
    rng: &mut R,
) {
    let dt = params.dt;
    let noise = (params.fluctuation_sd > 0.0)
        .then(|| Normal::new(0.0, params.fluctuation_sd).expect("finite positive sd"));
    let mut updates = Vec::with_capacity(agents.len());
    for (i, agent) in agents.iter().enumerate() {
        let ff = agent.target_id().and_then(|t| fields.get(&t));
        let e = ff.map_or(Point2::ZERO, |ff| target_direction(ff, agent.position));
        let mut force = driving_force(agent.velocity, agent.free_flow_speed, e, params);
        for (j, other) in agents.iter().enumerate() {
            if i == j {
                continue;
            }
            let reach = agent.radius + other.radius + CUTOFF_RANGES * params.repulsion_range;
            if (agent.position - other.position).norm_squared() > reach * reach {
                continue;
            }
            force += agent_repulsion(agent, other, params);
        }
        force += obstacle_repulsion(agent.position, agent.radius, topo, params).unwrap_or(Point2::ZERO);
        if let Some(n) = &noise {
            force += Point2::new(n.sample(rng), n.sample(rng));
        }
        let w = agent.velocity + force * dt;
        updates.push(clamp_speed(w, params.v_max_factor * agent.free_flow_speed));
    }
    for (agent, velocity) in agents.iter_mut().zip(updates) {
        let next = agent.position + velocity * dt;
        if topo.in_any_obstacle(next) || !topo.bounds.contains(next) {
            agent.velocity = Point2::ZERO;
        } else {
            agent.velocity = velocity;
            agent.position = next;
        }
    }
}

/// Fixed-step integration up to each loop time; agents reaching their
/// target are settled at the sub-step time.
#[derive(Debug, Clone)]
pub struct SfmModel {
    pub params: SfmParams,
    steps: u64,
}

impl SfmModel {
    pub fn new(params: SfmParams) -> Self {
        SfmModel { params, steps: 0 }
    }

    /// Simulated time reached by the integrator.
    pub fn time(&self) -> f64 {
        self.steps as f64 * self.params.dt
    }
}

impl LocomotionModel for SfmModel {
    fn update(&mut self, state: &mut SimulationState, sim_time: f64) {
        let dt = self.params.dt;
        while (self.steps + 1) as f64 * dt <= sim_time + 1e-9 * dt {
            let SimulationState {
                agents,
                floor_fields,
                topography,
                rng,
                ..
            } = state;
            sfm_step(agents, floor_fields, topography, &self.params, rng);
            self.steps += 1;
            let t = self.time();
            for idx in (0..state.agents.len()).rev() {
                state.settle_arrival(idx, t);
            }
        }
    }
}
