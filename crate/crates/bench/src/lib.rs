//! Fixtures shared by the benchmarks.

use crowdkit_core::agent::{Agent, Heuristic};
use crowdkit_core::scenario::{Bounds, InitialAgent, Target, Topography};
use crowdkit_core::{ModelName, Point2, Scenario, Shape};

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Shape {
    Shape::aabb_rect(x0, y0, x1, y1).unwrap()
}

/// A room of `width` meters with a 1 m door and the given agents packed
/// on the left.
pub fn bottleneck(model: ModelName, width: f64, agents: usize) -> Scenario {
    let mut s = Scenario {
        name: "bench_bottleneck".to_owned(),
        seed: 1,
        finish_time: 20.0,
        model_name: model,
        ..Scenario::default()
    };
    let door = width * 0.6;
    s.topography = Topography::empty(Bounds::new(0.0, 0.0, width, 10.0));
    s.topography.obstacles.push(rect(door, 0.0, door + 0.4, 4.5));
    s.topography.obstacles.push(rect(door, 5.5, door + 0.4, 10.0));
    s.topography.targets.push(Target {
        id: 1,
        shape: rect(width - 1.0, 3.0, width, 7.0),
        absorbing: true,
    });
    let columns = ((door - 1.0) / 0.6).floor().max(1.0) as usize;
    for k in 0..agents {
        let (c, r) = (k % columns, k / columns);
        s.topography.initial_agents.push(InitialAgent {
            position: Point2::new(0.6 + 0.6 * c as f64, 0.6 + 0.6 * (r % 15) as f64),
            target_ids: vec![1],
        });
    }
    s
}

pub fn agent_at(position: Point2, id: u32) -> Agent {
    Agent {
        id,
        position,
        velocity: Point2::ZERO,
        radius: 0.2,
        free_flow_speed: 1.34,
        step_length: 1.0,
        next_event_time: 0.0,
        targets: vec![1],
        target_index: 0,
        source_id: None,
        spawn_time: 0.0,
        heuristic: Heuristic::StepOrWait,
    }
}
