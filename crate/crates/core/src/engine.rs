//! Simulation loop, source and target controllers, and the model interface.
//!
//! One loop iteration advances the clock by `outputTimeStep` and runs, in
//! this order: source controller, dynamic floor field refresh (if enabled
//! and due), model update, target controller, output sinks. All randomness
//! comes from one ChaCha8 generator seeded with the scenario seed, drawn in
//! a fixed order: initial agents in declaration order, then per loop
//! iteration the sources in declaration order, then whatever the model
//! draws in agent id order.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::agent::{Agent, AgentId, Heuristic};
use crate::bhm::BhmRule;
use crate::floorfield::{compute_density, rasterize_speed, solve_all, FloorField, FloorFieldError, GridSpec};
use crate::geometry::Point2;
use crate::osm::{sample_step_length, CaMode, OsmRule};
use crate::scenario::{
    validate_scenario, AgentAttributes, Diagnostic, EntityId, ModelName, Scenario, Severity, Topography,
};
use crate::sfm::SfmModel;
use crate::stepping::SteppingModel;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("scenario is invalid: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("floor field: {0}")]
    FloorField(#[from] FloorFieldError),
    #[error("model initialization failed: {0}")]
    Model(String),
    #[error("output: {0}")]
    Output(#[from] std::io::Error),
}

/// A locomotion model as driven by the simulation loop.
///
/// `update` may move agents and remove the ones it settles at a target, but
/// must not touch the topography.
pub trait LocomotionModel {
    fn initialize(&mut self, _scenario: &Scenario, _state: &mut SimulationState) -> Result<(), EngineError> {
        Ok(())
    }

    fn pre_loop(&mut self, _state: &mut SimulationState) {}

    /// Advances the model's agents to `sim_time`.
    fn update(&mut self, state: &mut SimulationState, sim_time: f64);

    fn post_loop(&mut self, _state: &mut SimulationState) {}
}

/// The model named by the scenario.
pub fn build_model(scenario: &Scenario) -> Box<dyn LocomotionModel> {
    let params = &scenario.model_params;
    match scenario.model_name {
        ModelName::Osm => Box::new(SteppingModel::new(OsmRule {
            params: params.osm.clone(),
            mode: CaMode::None,
        })),
        ModelName::OsmCa => Box::new(SteppingModel::new(OsmRule {
            params: params.osm.clone(),
            mode: params.osm.ca_mode,
        })),
        ModelName::Sfm => Box::new(SfmModel::new(params.sfm.clone())),
        ModelName::Bhm => Box::new(SteppingModel::new(BhmRule)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Absorption {
    pub agent_id: AgentId,
    pub spawn_time: f64,
    pub time: f64,
}

#[derive(Debug, Clone)]
pub struct SimulationState {
    pub sim_time: f64,
    pub step: u64,
    /// Present agents, ordered by id.
    pub agents: Vec<Agent>,
    pub topography: Topography,
    pub floor_fields: BTreeMap<EntityId, FloorField>,
    pub rng: ChaCha8Rng,
    pub absorptions: Vec<Absorption>,
    pub spawned: u64,
    next_id: AgentId,
}

fn field_map(fields: Vec<FloorField>) -> BTreeMap<EntityId, FloorField> {
    fields.into_iter().map(|f| (f.target_id, f)).collect()
}

fn static_fields(topo: &Topography, h: f64, max_cells: u64) -> Result<BTreeMap<EntityId, FloorField>, FloorFieldError> {
    let speed = rasterize_speed(topo, h, max_cells, None)?;
    Ok(field_map(solve_all(topo, &speed)?))
}

impl SimulationState {
    /// Empty state with static floor fields of cell size `h`.
    pub fn for_topography(topography: Topography, h: f64, seed: u64) -> Result<Self, FloorFieldError> {
        let floor_fields = static_fields(&topography, h, u64::MAX)?;
        Ok(SimulationState {
            sim_time: 0.0,
            step: 0,
            agents: Vec::new(),
            topography,
            floor_fields,
            rng: ChaCha8Rng::seed_from_u64(seed),
            absorptions: Vec::new(),
            spawned: 0,
            next_id: 1,
        })
    }

    pub fn index_of(&self, id: AgentId) -> Option<usize> {
        self.agents.binary_search_by_key(&id, |a| a.id).ok()
    }

    /// Appends an agent with the next free id and returns that id.
    pub fn add_agent(&mut self, mut agent: Agent) -> AgentId {
        agent.id = self.next_id;
        self.next_id += 1;
        self.spawned += 1;
        self.agents.push(agent);
        self.next_id - 1
    }

    /// Handles `agents[idx]` having its center inside its current target:
    /// removal if the target absorbs, otherwise a switch to the next target
    /// in its list. Returns whether the agent was removed.
    pub fn settle_arrival(&mut self, idx: usize, time: f64) -> bool {
        let agent = &self.agents[idx];
        let Some(target) = agent.target_id().and_then(|t| self.topography.target(t)) else {
            return false;
        };
        if !target.shape.contains_point(agent.position) {
            return false;
        }
        if target.absorbing {
            let agent = self.agents.remove(idx);
            self.absorptions.push(Absorption {
                agent_id: agent.id,
                spawn_time: agent.spawn_time,
                time,
            });
            true
        } else {
            let agent = &mut self.agents[idx];
            if agent.target_index + 1 < agent.targets.len() {
                agent.target_index += 1;
            }
            false
        }
    }
}

/// Draws a free-flow speed from the normal distribution of the attributes,
/// truncated to `[speedMin, speedMax]` by redrawing.
pub fn sample_speed<R: Rng + ?Sized>(attrs: &AgentAttributes, rng: &mut R) -> f64 {
    if attrs.speed_sd <= 0.0 {
        return attrs.speed_mean.clamp(attrs.speed_min, attrs.speed_max);
    }
    let normal = Normal::new(attrs.speed_mean, attrs.speed_sd).expect("finite positive sd");
    for _ in 0..10_000 {
        let v = normal.sample(rng);
        if (attrs.speed_min..=attrs.speed_max).contains(&v) {
            return v;
        }
    }
    attrs.speed_mean.clamp(attrs.speed_min, attrs.speed_max)
}

fn new_agent(scenario: &Scenario, position: Point2, targets: Vec<EntityId>, source: Option<EntityId>, time: f64, rng: &mut ChaCha8Rng) -> Agent {
    let attrs = &scenario.agent_attributes;
    let free_flow_speed = sample_speed(attrs, rng);
    let step_length = sample_step_length(free_flow_speed, &scenario.model_params.osm, rng);
    let heuristic = if scenario.model_name == ModelName::Bhm {
        scenario.model_params.bhm.heuristic_for(source)
    } else {
        Heuristic::default()
    };
    Agent {
        id: 0,
        position,
        velocity: Point2::ZERO,
        radius: attrs.torso_radius,
        free_flow_speed,
        step_length,
        next_event_time: time,
        targets,
        target_index: 0,
        source_id: source,
        spawn_time: time,
        heuristic,
    }
}

/// Rejection attempts per agent before a spawn is deferred.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

/// Spawns the agents of each source on its schedule.
#[derive(Debug, Clone)]
pub struct SourceController {
    spawned: Vec<u32>,
    last_time: Option<f64>,
}

impl SourceController {
    pub fn new(topo: &Topography) -> Self {
        SourceController {
            spawned: vec![0; topo.sources.len()],
            last_time: None,
        }
    }

    /// Whether every source has spawned all its agents.
    pub fn exhausted(&self, topo: &Topography) -> bool {
        topo.sources
            .iter()
            .zip(&self.spawned)
            .all(|(s, &n)| n >= s.spawn_number)
    }

    /// Agents due by `time` that could not be placed yet.
    pub fn deferred(&self, topo: &Topography, time: f64) -> u64 {
        topo.sources
            .iter()
            .zip(&self.spawned)
            .map(|(s, &n)| (due_count(s, time) - n.min(due_count(s, time))) as u64)
            .sum()
    }

    /// Places every agent due by `time`, sources in declaration order.
    pub fn run(&mut self, state: &mut SimulationState, scenario: &Scenario, time: f64) {
        let topo = &scenario.topography;
        for (k, source) in topo.sources.iter().enumerate() {
            let due = due_count(source, time);
            while self.spawned[k] < due {
                let nominal = source.first_spawn_time + self.spawned[k] as f64 * source.inter_spawn_time;
                let on_schedule = self.last_time.is_none_or(|last| nominal > last);
                let Some(position) = place(state, source, scenario.agent_attributes.torso_radius) else {
                    break;
                };
                let spawn_time = if on_schedule { nominal } else { time };
                let agent = new_agent(scenario, position, source.target_ids.clone(), Some(source.id), spawn_time, &mut state.rng);
                state.add_agent(agent);
                self.spawned[k] += 1;
            }
        }
        self.last_time = Some(time);
    }
}

fn due_count(source: &crate::scenario::Source, time: f64) -> u32 {
    if source.spawn_number == 0 || time + 1e-9 < source.first_spawn_time {
        return 0;
    }
    let elapsed = ((time - source.first_spawn_time) / source.inter_spawn_time + 1e-9).floor();
    ((elapsed as u64 + 1).min(source.spawn_number as u64)) as u32
}

/// Uniform point of the source shape where an agent of radius `r` touches
/// neither another agent nor an obstacle.
fn place(state: &mut SimulationState, source: &crate::scenario::Source, r: f64) -> Option<Point2> {
    let bb = source.shape.bounding_box();
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let p = Point2::new(
            state.rng.random_range(bb.min.x..=bb.max.x),
            state.rng.random_range(bb.min.y..=bb.max.y),
        );
        if !source.shape.contains_point(p) || !state.topography.bounds.contains(p) {
            continue;
        }
        if state.topography.obstacles.iter().any(|o| o.distance_to(p) < r) {
            continue;
        }
        if state.agents.iter().any(|a| (a.position - p).norm() < a.radius + r) {
            continue;
        }
        return Some(p);
    }
    None
}

/// Settles every agent whose center lies inside its current target.
pub fn target_controller(state: &mut SimulationState, time: f64) {
    for idx in (0..state.agents.len()).rev() {
        state.settle_arrival(idx, time);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentSnapshot {
    pub id: AgentId,
    pub position: Point2,
    pub target: Option<EntityId>,
}

/// State of the simulation at one output instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// Loop iteration, starting at 1.
    pub time_step: u64,
    pub time: f64,
    /// Present agents, ordered by id.
    pub agents: Vec<AgentSnapshot>,
}

impl Frame {
    pub fn of(state: &SimulationState) -> Self {
        Frame {
            time_step: state.step,
            time: state.sim_time,
            agents: state
                .agents
                .iter()
                .map(|a| AgentSnapshot {
                    id: a.id,
                    position: a.position,
                    target: a.target_id(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub wall_time: Duration,
    pub final_time: f64,
    pub steps: u64,
    pub spawned: u64,
    pub absorbed: u64,
    pub remaining: u64,
    pub absorptions: Vec<Absorption>,
    /// Spawn times of agents still present at the end, by id.
    pub unabsorbed: Vec<(AgentId, f64)>,
}

/// Receives every output frame and the final summary.
pub trait FrameSink {
    fn record(&mut self, frame: &Frame) -> std::io::Result<()>;

    fn finish(&mut self, _summary: &RunSummary) -> std::io::Result<()> {
        Ok(())
    }
}

/// Builds the initial state: floor fields and the initial agents.
pub fn initial_state(scenario: &Scenario) -> Result<SimulationState, EngineError> {
    let diagnostics = validate_scenario(scenario);
    if diagnostics.iter().any(|d| d.severity == Severity::Error) {
        return Err(EngineError::Invalid(diagnostics));
    }
    let topo = scenario.topography.clone();
    let floor_fields = static_fields(&topo, scenario.floor_field_cell_size, scenario.floor_field_max_cells)?;
    let mut state = SimulationState {
        sim_time: 0.0,
        step: 0,
        agents: Vec::new(),
        topography: topo,
        floor_fields,
        rng: ChaCha8Rng::seed_from_u64(scenario.seed),
        absorptions: Vec::new(),
        spawned: 0,
        next_id: 1,
    };
    for initial in &scenario.topography.initial_agents {
        let agent = new_agent(scenario, initial.position, initial.target_ids.clone(), None, 0.0, &mut state.rng);
        state.add_agent(agent);
    }
    Ok(state)
}

fn refresh_dynamic_fields(state: &mut SimulationState, scenario: &Scenario) -> Result<(), FloorFieldError> {
    let Some(params) = &scenario.dynamic_floor_field else {
        return Ok(());
    };
    let spec = GridSpec::covering(&state.topography.bounds, scenario.floor_field_cell_size, scenario.floor_field_max_cells)?;
    let positions: Vec<Point2> = state.agents.iter().map(|a| a.position).collect();
    let density = compute_density(&positions, spec, params.kernel_radius);
    let speed = rasterize_speed(&state.topography, scenario.floor_field_cell_size, scenario.floor_field_max_cells, Some((&density, params)))?;
    state.floor_fields = field_map(solve_all(&state.topography, &speed)?);
    Ok(())
}

/// Runs `scenario` with `model`, feeding every frame to `sinks`.
pub fn run_with_model(
    scenario: &Scenario,
    model: &mut dyn LocomotionModel,
    sinks: &mut [&mut dyn FrameSink],
) -> Result<RunSummary, EngineError> {
    let started = Instant::now();
    let mut state = initial_state(scenario)?;
    model.initialize(scenario, &mut state)?;
    let mut sources = SourceController::new(&scenario.topography);
    sources.run(&mut state, scenario, 0.0);
    target_controller(&mut state, 0.0);
    model.pre_loop(&mut state);

    let dt = scenario.output_time_step;
    let dynamic_interval = scenario.dynamic_floor_field.as_ref().map(|p| p.recompute_interval);
    let mut last_refresh = 0.0;
    if dynamic_interval.is_some() {
        refresh_dynamic_fields(&mut state, scenario)?;
    }
    while state.sim_time < scenario.finish_time - 1e-9 * dt {
        if state.agents.is_empty() && sources.exhausted(&scenario.topography) {
            break;
        }
        state.step += 1;
        state.sim_time = state.step as f64 * dt;
        let now = state.sim_time;
        sources.run(&mut state, scenario, now);
        if let Some(interval) = dynamic_interval {
            if now - last_refresh >= interval - 1e-9 {
                refresh_dynamic_fields(&mut state, scenario)?;
                last_refresh = now;
            }
        }
        model.update(&mut state, now);
        target_controller(&mut state, now);
        let frame = Frame::of(&state);
        for sink in sinks.iter_mut() {
            sink.record(&frame)?;
        }
    }
    model.post_loop(&mut state);

    let summary = RunSummary {
        wall_time: started.elapsed(),
        final_time: state.sim_time,
        steps: state.step,
        spawned: state.spawned,
        absorbed: state.absorptions.len() as u64,
        remaining: state.agents.len() as u64,
        absorptions: state.absorptions.clone(),
        unabsorbed: state.agents.iter().map(|a| (a.id, a.spawn_time)).collect(),
    };
    for sink in sinks.iter_mut() {
        sink.finish(&summary)?;
    }
    Ok(summary)
}

/// Runs `scenario` with the model it names.
pub fn run_simulation(scenario: &Scenario, sinks: &mut [&mut dyn FrameSink]) -> Result<RunSummary, EngineError> {
    let mut model = build_model(scenario);
    run_with_model(scenario, model.as_mut(), sinks)
}

/// Collects all frames in memory.
#[derive(Debug, Default)]
pub struct FrameRecorder {
    pub frames: Vec<Frame>,
    pub summary: Option<RunSummary>,
}

impl FrameSink for FrameRecorder {
    fn record(&mut self, frame: &Frame) -> std::io::Result<()> {
        self.frames.push(frame.clone());
        Ok(())
    }

    fn finish(&mut self, summary: &RunSummary) -> std::io::Result<()> {
        self.summary = Some(summary.clone());
        Ok(())
    }
}
