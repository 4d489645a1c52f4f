//! Completion events ordered on the virtual clock.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// A branch (or local model) coming back from a client.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub completion_time: f64,
    pub dispatch_time: f64,
    pub branch_id: usize,
    pub client_id: usize,
    /// Dispatch order; unique per run and breaks time ties.
    pub sequence_no: u64,
}

impl Event {
    pub fn duration(&self) -> f64 {
        self.completion_time - self.dispatch_time
    }
}

#[derive(Debug)]
struct Queued(Event);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    // reversed: BinaryHeap is a max-heap and we want the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .completion_time
            .total_cmp(&self.0.completion_time)
            .then_with(|| other.0.sequence_no.cmp(&self.0.sequence_no))
    }
}

/// Min-queue on `(completion_time, sequence_no)`.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Queued>,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: Event) {
        debug_assert!(event.completion_time >= event.dispatch_time);
        self.heap.push(Queued(event));
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|q| q.0)
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|q| q.0.completion_time)
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

    fn ev(t: f64, seq: u64) -> Event {
        Event {
            completion_time: t,
            dispatch_time: 0.0,
            branch_id: 0,
            client_id: 0,
            sequence_no: seq,
        }
    }

    #[test]
    fn pops_in_time_then_sequence_order() {
        let mut q = EventQueue::new();
        for (t, s) in [(5.0, 0), (1.0, 1), (5.0, 2), (3.0, 3), (1.0, 4)] {
            q.push(ev(t, s));
        }
        let order: Vec<(f64, u64)> = std::iter::from_fn(|| q.pop()).map(|e| (e.completion_time, e.sequence_no)).collect();
        assert_eq!(order, vec![(1.0, 1), (1.0, 4), (3.0, 3), (5.0, 0), (5.0, 2)]);
    }
}
