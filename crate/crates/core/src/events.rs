//! Footstep event queue for the stepping models.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::agent::AgentId;

/// One scheduled footstep. Events are totally ordered by
/// `(time, sequence)`; the sequence number is the agent's spawn order, so
/// agents stepping at the same instant go in the order they were created.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvent {
    pub time: f64,
    pub agent_id: AgentId,
    pub sequence: u64,
}

impl Eq for StepEvent {}

impl Ord for StepEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then_with(|| self.sequence.cmp(&other.sequence))
    }
}

impl PartialOrd for StepEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<std::cmp::Reverse<StepEvent>>,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: StepEvent) {
        self.heap.push(std::cmp::Reverse(event));
    }

    /// Removes and returns the earliest event if it is due by `until`.
    pub fn pop_due(&mut self, until: f64) -> Option<StepEvent> {
        match self.heap.peek() {
            Some(std::cmp::Reverse(e)) if e.time <= until => self.heap.pop().map(|r| r.0),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interleaves_by_time_then_sequence() {
        // A steps every 0.5 s, B every 1.0 s
        let mut q = EventQueue::new();
        q.push(StepEvent { time: 0.5, agent_id: 1, sequence: 1 });
        q.push(StepEvent { time: 1.0, agent_id: 2, sequence: 2 });
        let mut log = Vec::new();
        while let Some(e) = q.pop_due(2.0) {
            log.push((e.agent_id, e.time));
            let period = if e.agent_id == 1 { 0.5 } else { 1.0 };
            q.push(StepEvent { time: e.time + period, ..e });
        }
        assert_eq!(
            log,
            vec![(1, 0.5), (1, 1.0), (2, 1.0), (1, 1.5), (1, 2.0), (2, 2.0)]
        );
        assert_eq!(q.len(), 2);
    }

    #[test]
    fn empty_queue_is_a_noop() {
        let mut q = EventQueue::new();
        assert!(q.pop_due(f64::INFINITY).is_none());
        assert!(q.is_empty());
    }
}
