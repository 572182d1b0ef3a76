use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use thiserror::Error;

use super::SimTime;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("event scheduled at {at} but the clock already reads {now}")]
    InPast { at: SimTime, now: SimTime },
}

/// A queued event: fires in `(fire_time, sequence)` order.
#[derive(Debug)]
pub struct Event<E> {
    pub fire_time: SimTime,
    pub sequence: u64,
    pub payload: E,
}

impl<E> PartialEq for Event<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_time == other.fire_time && self.sequence == other.sequence
    }
}

impl<E> Eq for Event<E> {}

impl<E> PartialOrd for Event<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Event<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.fire_time, self.sequence).cmp(&(other.fire_time, other.sequence))
    }
}

/// Virtual clock plus a priority queue of pending events.
///
/// Ties on `fire_time` resolve in insertion order.
#[derive(Debug)]
pub struct EventQueue<E> {
    now: SimTime,
    next_sequence: u64,
    executed: u64,
    heap: BinaryHeap<Reverse<Event<E>>>,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            now: SimTime::ZERO,
            next_sequence: 0,
            executed: 0,
            heap: BinaryHeap::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of events fired so far.
    pub fn executed(&self) -> u64 {
        self.executed
    }

    pub fn pending(&self) -> usize {
        self.heap.len()
    }

    pub fn try_schedule(&mut self, at: SimTime, payload: E) -> Result<u64, ScheduleError> {
        if at < self.now {
            return Err(ScheduleError::InPast { at, now: self.now });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(Reverse(Event {
            fire_time: at,
            sequence,
            payload,
        }));
        Ok(sequence)
    }

    /// Queues `payload` at `at`.
    ///
    /// Scheduling before the current clock is a logic error in the caller and
    /// aborts the simulation.
    pub fn schedule(&mut self, at: SimTime, payload: E) -> u64 {
        match self.try_schedule(at, payload) {
            Ok(seq) => seq,
            Err(e) => panic!("fatal: {e}"),
        }
    }

    pub fn schedule_in(&mut self, delay: SimTime, payload: E) -> u64 {
        let at = self.now + delay;
        self.schedule(at, payload)
    }

    /// Pops the next event with `fire_time <= end`, advancing the clock to it.
    pub fn pop_until(&mut self, end: SimTime) -> Option<Event<E>> {
        match self.heap.peek() {
            Some(Reverse(ev)) if ev.fire_time <= end => {}
            _ => return None,
        }
        let Reverse(ev) = self.heap.pop()?;
        debug_assert!(ev.fire_time >= self.now);
        self.now = ev.fire_time;
        self.executed += 1;
        Some(ev)
    }

    /// Fires every event with `fire_time <= end` through `handler`, then sets
    /// the clock to `end`. The handler may schedule further events.
    pub fn run_until<F>(&mut self, end: SimTime, mut handler: F)
    where
        F: FnMut(&mut Self, SimTime, E),
    {
        while let Some(ev) = self.pop_until(end) {
            handler(self, ev.fire_time, ev.payload);
        }
        if end > self.now {
            self.now = end;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drain(q: &mut EventQueue<&'static str>, end: SimTime) -> Vec<&'static str> {
        let mut fired = Vec::new();
        q.run_until(end, |_, _, p| fired.push(p));
        fired
    }

    #[test]
    fn earlier_time_fires_first() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(5), "A");
        q.schedule(SimTime(3), "B");
        assert_eq!(drain(&mut q, SimTime(10)), vec!["B", "A"]);
    }

    #[test]
    fn ties_fire_in_insertion_order() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(5), "A");
        q.schedule(SimTime(5), "B");
        assert_eq!(drain(&mut q, SimTime(10)), vec!["A", "B"]);
    }

    #[test]
    fn past_event_is_rejected() {
        let mut q: EventQueue<&str> = EventQueue::new();
        q.run_until(SimTime(4), |_, _, _| {});
        assert_eq!(
            q.try_schedule(SimTime(2), "A"),
            Err(ScheduleError::InPast {
                at: SimTime(2),
                now: SimTime(4)
            })
        );
    }

    #[test]
    #[should_panic(expected = "fatal")]
    fn schedule_in_past_panics() {
        let mut q: EventQueue<&str> = EventQueue::new();
        q.run_until(SimTime(4), |_, _, _| {});
        q.schedule(SimTime(2), "A");
    }

    #[test]
    fn empty_run_advances_clock() {
        let mut q: EventQueue<()> = EventQueue::new();
        let end = SimTime::from_secs(100);
        let mut n = 0;
        q.run_until(end, |_, _, _| n += 1);
        assert_eq!(n, 0);
        assert_eq!(q.now(), end);
        assert_eq!(q.executed(), 0);
    }

    #[test]
    fn single_event_fires_once() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_secs(50), ());
        let mut n = 0;
        q.run_until(SimTime::from_secs(100), |_, t, _| {
            assert_eq!(t, SimTime::from_secs(50));
            n += 1
        });
        assert_eq!(n, 1);
    }

    #[test]
    fn events_after_end_stay_queued() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(10), "in");
        q.schedule(SimTime(11), "out");
        assert_eq!(drain(&mut q, SimTime(10)), vec!["in"]);
        assert_eq!(q.pending(), 1);
        assert_eq!(q.now(), SimTime(10));
    }

    #[test]
    fn handler_can_chain_events() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(0), 0u32);
        let mut seen = Vec::new();
        q.run_until(SimTime(100), |q, t, n| {
            seen.push((t.ticks(), n));
            if n < 3 {
                q.schedule_in(SimTime(10), n + 1);
            }
        });
        assert_eq!(seen, vec![(0, 0), (10, 1), (20, 2), (30, 3)]);
    }
}
