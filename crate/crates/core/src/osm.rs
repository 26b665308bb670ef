//! Optimal steps model.
//!
//! Agents move by instantaneous footsteps. Each step goes to the point of
//! the step disc (radius `s0` around the current position) that minimizes
//! the aggregated potential: arrival time of the floor field plus
//! personal-space repulsion of nearby agents plus obstacle repulsion. The
//! time between two steps, `s0 / v0`, never changes, so shorter steps in a
//! crowd slow the agent down.
//!
//! With a cellular-automaton neighborhood the optimizer only looks at the
//! lattice points around the agent.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, Body, CONTACT_TOLERANCE};
use crate::floorfield::FloorField;
use crate::geometry::{point_segment_distance, Point2};
use crate::scenario::Topography;
use crate::stepping::StepRule;

/// Lattice neighborhood used when mimicking a cellular automaton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CaMode {
    #[default]
    None,
    VonNeumann,
    Moore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct OsmParams {
    /// Step length intercept, in meters.
    pub beta0: f64,
    /// Step length slope over free-flow speed, in seconds.
    pub beta1: f64,
    /// Standard deviation of the step length noise, in meters.
    pub sigma: f64,
    pub delta_int: f64,
    pub delta_per: f64,
    pub h_tor: f64,
    pub h_int: f64,
    pub h_per: f64,
    pub h_obs: f64,
    pub delta_obs: f64,
    pub rings: u32,
    pub points_per_ring: u32,
    /// Golden-section iterations of the angular refinement.
    pub refinement_iterations: u32,
    pub ca_mode: CaMode,
}

impl Default for OsmParams {
    fn default() -> Self {
        OsmParams {
            beta0: 0.4625,
            beta1: 0.4226,
            sigma: 0.036,
            delta_int: 0.45,
            delta_per: 1.2,
            h_tor: 1000.0,
            h_int: 20.0,
            h_per: 1.0,
            h_obs: 6.0,
            delta_obs: 0.8,
            rings: 3,
            points_per_ring: 16,
            refinement_iterations: 20,
            ca_mode: CaMode::None,
        }
    }
}

impl OsmParams {
    /// Invariant violations, given the agents' torso radius.
    pub fn problems(&self, torso_radius: f64) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.beta0 > 0.0 && self.beta1 > 0.0) {
            out.push("beta0 and beta1 must be positive".to_owned());
        }
        if !(self.sigma >= 0.0) {
            out.push("sigma must not be negative".to_owned());
        }
        if !(2.0 * torso_radius <= self.delta_int && self.delta_int < self.delta_per) {
            out.push("radii must satisfy 2 * torsoRadius <= deltaInt < deltaPer".to_owned());
        }
        if !(self.h_tor > self.h_int && self.h_int > self.h_per && self.h_per > 0.0) {
            out.push("heights must satisfy hTor > hInt > hPer > 0".to_owned());
        }
        if !(self.h_obs > 0.0 && self.delta_obs > 0.0) {
            out.push("hObs and deltaObs must be positive".to_owned());
        }
        if self.rings == 0 || self.points_per_ring < 4 {
            out.push("need at least 1 ring of at least 4 points".to_owned());
        }
        out
    }

    /// Largest distance between neighboring disc candidates for a step
    /// length `s0`: the arc spacing on the outer ring or the ring gap.
    pub fn candidate_spacing(&self, step_length: f64) -> f64 {
        let arc = TAU * step_length / self.points_per_ring as f64;
        let gap = step_length / self.rings as f64;
        arc.max(gap)
    }
}

/// Lower bound for sampled step lengths, in meters.
pub const MIN_STEP_LENGTH: f64 = 0.1;

/// `s0 = beta0 + beta1 * v0 + eps` with `eps ~ N(0, sigma^2)`, drawn once per
/// agent and clamped to [`MIN_STEP_LENGTH`].
pub fn sample_step_length<R: Rng + ?Sized>(free_flow_speed: f64, params: &OsmParams, rng: &mut R) -> f64 {
    let mean = params.beta0 + params.beta1 * free_flow_speed;
    let noise = if params.sigma > 0.0 {
        Normal::new(0.0, params.sigma)
            .expect("sigma is finite and positive")
            .sample(rng)
    } else {
        0.0
    };
    (mean + noise).max(MIN_STEP_LENGTH)
}

/// Compact-support kernel `height * exp(2 d^2 / (d^2 - width^2))` on
/// `d < width`, zero beyond. Equals `height` at zero and decays smoothly.
pub fn bump(d: f64, width: f64, height: f64) -> f64 {
    if d >= width {
        return 0.0;
    }
    let d2 = d * d;
    height * (2.0 * d2 / (d2 - width * width)).exp()
}

/// Obstacle kernel `height * exp(2 / ((d / width)^2 - 1))` on `d < width`,
/// zero beyond. Its largest value, at `d = 0`, is `height / e^2`.
pub fn obstacle_kernel(d: f64, width: f64, height: f64) -> f64 {
    if d >= width {
        return 0.0;
    }
    let q = d / width;
    height * (2.0 / (q * q - 1.0)).exp()
}

/// Repulsion that `other` exerts on an agent of radius `self_radius`
/// standing at `x`: personal space, intimate space and, while the torsos
/// overlap, the torso term.
pub fn agent_potential(x: Point2, self_radius: f64, other: &Body, params: &OsmParams) -> f64 {
    let d = (other.position - x).norm();
    let contact = self_radius + other.radius;
    let per = bump(d, params.delta_per, params.h_per);
    if d < contact {
        let int = bump(d, params.delta_int, params.h_int);
        per + int + params.h_tor
    } else if d < params.delta_int {
        per + bump(d, params.delta_int, params.h_int)
    } else if d < params.delta_per {
        per
    } else {
        0.0
    }
}

/// Strongest obstacle repulsion at `x`: infinite within `self_radius` of an
/// obstacle, otherwise [`obstacle_kernel`] of the distance to its boundary.
pub fn obstacle_potential(x: Point2, self_radius: f64, topo: &Topography, params: &OsmParams) -> f64 {
    topo.obstacles
        .iter()
        .map(|o| {
            let d = o.distance_to(x);
            if d < self_radius {
                f64::INFINITY
            } else {
                obstacle_kernel(d, params.delta_obs, params.h_obs)
            }
        })
        .fold(0.0, f64::max)
}

/// Total potential of position `x` for an agent of the given radius.
pub fn aggregate_potential(
    x: Point2,
    self_radius: f64,
    neighbors: &[Body],
    ff: &FloorField,
    topo: &Topography,
    params: &OsmParams,
) -> f64 {
    let target = match ff.sample_u(x) {
        Ok(u) if u.is_finite() => u,
        _ => return f64::INFINITY,
    };
    let obstacle = obstacle_potential(x, self_radius, topo, params);
    if obstacle.is_infinite() {
        return f64::INFINITY;
    }
    let agents: f64 = neighbors
        .iter()
        .map(|n| agent_potential(x, self_radius, n, params))
        .sum();
    target + agents + obstacle
}

/// Whether an agent of radius `radius` may move in a straight line from
/// `from` to `to` without its torso touching a neighbor (or starting and
/// ending apart from neighbors it already overlaps) and without crossing an
/// obstacle. The destination must lie inside the topography bounds.
pub fn step_is_feasible(from: Point2, to: Point2, radius: f64, neighbors: &[Body], topo: &Topography) -> bool {
    if !topo.bounds.contains(to) {
        return false;
    }
    for n in neighbors {
        let contact = radius + n.radius - CONTACT_TOLERANCE;
        let clearance = if (n.position - from).norm() < contact {
            (n.position - to).norm()
        } else {
            point_segment_distance(n.position, from, to)
        };
        if clearance < contact {
            return false;
        }
    }
    topo.obstacles
        .iter()
        .all(|o| o.segment_distance(from, to) >= radius)
}

/// Candidate positions of the disc optimizer: the current position followed
/// by `rings` concentric rings of `points_per_ring` points each.
pub fn disc_candidates(center: Point2, step_length: f64, params: &OsmParams) -> Vec<Point2> {
    let mut out = Vec::with_capacity(1 + (params.rings * params.points_per_ring) as usize);
    out.push(center);
    for ring in 1..=params.rings {
        let radius = step_length * ring as f64 / params.rings as f64;
        for k in 0..params.points_per_ring {
            let angle = TAU * k as f64 / params.points_per_ring as f64;
            out.push(center + Point2::from_polar(radius, angle));
        }
    }
    out
}

/// Everything a footstep decision reads besides the agents.
#[derive(Clone, Copy)]
pub struct StepContext<'a> {
    pub floor_field: &'a FloorField,
    pub topography: &'a Topography,
    pub params: &'a OsmParams,
}

impl StepContext<'_> {
    pub fn potential(&self, x: Point2, radius: f64, neighbors: &[Body]) -> f64 {
        aggregate_potential(x, radius, neighbors, self.floor_field, self.topography, self.params)
    }

    /// Potential of a step destination, infinite if the step is infeasible.
    pub fn step_value(&self, from: Point2, to: Point2, radius: f64, neighbors: &[Body]) -> f64 {
        if step_is_feasible(from, to, radius, neighbors, self.topography) {
            self.potential(to, radius, neighbors)
        } else {
            f64::INFINITY
        }
    }
}

/// Next footstep: minimum over the disc candidates (first one wins ties),
/// then a golden-section refinement of the angle on the winning ring.
pub fn next_position(agent: &Agent, neighbors: &[Body], ctx: &StepContext<'_>) -> Point2 {
    let x = agent.position;
    let r = agent.radius;
    let params = ctx.params;
    let s0 = agent.step_length;

    let mut best = x;
    let mut best_value = ctx.potential(x, r, neighbors);
    let mut best_ring: Option<(f64, f64)> = None;
    for ring in 1..=params.rings {
        let radius = s0 * ring as f64 / params.rings as f64;
        for k in 0..params.points_per_ring {
            let angle = TAU * k as f64 / params.points_per_ring as f64;
            let y = x + Point2::from_polar(radius, angle);
            let v = ctx.step_value(x, y, r, neighbors);
            if v < best_value {
                best = y;
                best_value = v;
                best_ring = Some((radius, angle));
            }
        }
    }

    if let Some((radius, angle)) = best_ring {
        let half = TAU / params.points_per_ring as f64;
        let eval = |phi: f64| {
            let y = x + Point2::from_polar(radius, phi);
            (ctx.step_value(x, y, r, neighbors), y)
        };
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (angle - half, angle + half);
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let (mut fc, mut fd) = (eval(c), eval(d));
        for _ in 0..params.refinement_iterations {
            if fc.0 < fd.0 {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = eval(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = eval(d);
            }
        }
        let refined = if fc.0 <= fd.0 { fc } else { fd };
        if refined.0 < best_value {
            best = refined.1;
        }
    }
    best
}

/// Lattice offsets in candidate order: east, north, west, south, then for
/// the Moore neighborhood the four diagonals.
pub fn ca_offsets(mode: CaMode, step_length: f64) -> Vec<Point2> {
    let s = step_length;
    let mut out = Vec::new();
    if mode == CaMode::None {
        return out;
    }
    out.extend([
        Point2::new(s, 0.0),
        Point2::new(0.0, s),
        Point2::new(-s, 0.0),
        Point2::new(0.0, -s),
    ]);
    if mode == CaMode::Moore {
        out.extend([
            Point2::new(s, s),
            Point2::new(-s, s),
            Point2::new(-s, -s),
            Point2::new(s, -s),
        ]);
    }
    out
}

/// Next footstep restricted to the lattice neighborhood.
pub fn ca_next_position(agent: &Agent, neighbors: &[Body], ctx: &StepContext<'_>, mode: CaMode) -> Point2 {
    let x = agent.position;
    let r = agent.radius;
    let mut best = x;
    let mut best_value = ctx.potential(x, r, neighbors);
    for offset in ca_offsets(mode, agent.step_length) {
        let y = x + offset;
        let v = ctx.step_value(x, y, r, neighbors);
        if v < best_value {
            best = y;
            best_value = v;
        }
    }
    best
}

/// Footstep rule of the optimal steps model.
#[derive(Debug, Clone)]
pub struct OsmRule {
    pub params: OsmParams,
    pub mode: CaMode,
}

impl StepRule for OsmRule {
    fn interaction_range(&self, agent: &Agent) -> f64 {
        let lattice = if self.mode == CaMode::Moore { 2f64.sqrt() } else { 1.0 };
        agent.step_length * lattice + self.params.delta_per.max(4.0 * agent.radius)
    }

    fn next_position(&self, agent: &Agent, neighbors: &[Body], ff: &FloorField, topo: &Topography) -> Point2 {
        let ctx = StepContext {
            floor_field: ff,
            topography: topo,
            params: &self.params,
        };
        match self.mode {
            CaMode::None => next_position(agent, neighbors, &ctx),
            mode => ca_next_position(agent, neighbors, &ctx, mode),
        }
    }
}
