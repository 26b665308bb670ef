//! Event-driven update shared by the two footstep models.

use crate::agent::{bodies_near, Agent, AgentId, Body};
use crate::engine::{LocomotionModel, SimulationState};
use crate::events::{EventQueue, StepEvent};
use crate::floorfield::FloorField;
use crate::geometry::Point2;
use crate::scenario::Topography;

/// Decides a single footstep.
pub trait StepRule {
    /// Agents farther than this from the stepping agent cannot influence
    /// its decision.
    fn interaction_range(&self, agent: &Agent) -> f64;

    fn next_position(&self, agent: &Agent, neighbors: &[Body], ff: &FloorField, topo: &Topography) -> Point2;
}

/// Executes footsteps in `(time, spawn order)` order. Every agent steps once
/// per step duration, the first time one duration after it was spawned.
#[derive(Debug)]
pub struct SteppingModel<R> {
    pub rule: R,
    queue: EventQueue,
    last_registered: AgentId,
    executed: u64,
}

impl<R: StepRule> SteppingModel<R> {
    pub fn new(rule: R) -> Self {
        SteppingModel {
            rule,
            queue: EventQueue::new(),
            last_registered: 0,
            executed: 0,
        }
    }

    /// Footsteps executed so far.
    pub fn executed_steps(&self) -> u64 {
        self.executed
    }

    fn register_new_agents(&mut self, state: &mut SimulationState) {
        let last = self.last_registered;
        for agent in state.agents.iter_mut().filter(|a| a.id > last) {
            agent.next_event_time = agent.spawn_time + agent.step_duration();
            self.queue.push(StepEvent {
                time: agent.next_event_time,
                agent_id: agent.id,
                sequence: agent.id as u64,
            });
            self.last_registered = agent.id;
        }
    }
}

impl<R: StepRule> LocomotionModel for SteppingModel<R> {
    fn update(&mut self, state: &mut SimulationState, sim_time: f64) {
        self.register_new_agents(state);
        while let Some(event) = self.queue.pop_due(sim_time) {
            let Some(idx) = state.index_of(event.agent_id) else {
                continue;
            };
            let agent = &state.agents[idx];
            let duration = agent.step_duration();
            let next = match agent.target_id().and_then(|t| state.floor_fields.get(&t)) {
                Some(ff) => {
                    let neighbors = bodies_near(&state.agents, idx, agent.position, self.rule.interaction_range(agent));
                    self.rule.next_position(agent, &neighbors, ff, &state.topography)
                }
                None => agent.position,
            };
            let agent = &mut state.agents[idx];
            agent.velocity = (next - agent.position) / duration;
            agent.position = next;
            self.executed += 1;
            if state.settle_arrival(idx, event.time) {
                continue;
            }
            let agent = &mut state.agents[idx];
            agent.next_event_time = event.time + duration;
            self.queue.push(StepEvent {
                time: agent.next_event_time,
                ..event
            });
        }
    }
}
