//! Shared-medium radio model: range-gated delivery, carrier-sense access with
//! measurable contention delay, airtime, and per-node energy accounting.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::mobility::Position;
use crate::sim::{RngStream, SimTime, TICKS_PER_SECOND};
use crate::NodeId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioParams {
    /// meters
    pub tx_range: f64,
    /// meters
    pub interference_range: f64,
    /// bits per second
    pub bitrate: u64,
    /// seconds
    pub prop_delay: f64,
    /// watts
    pub tx_power: f64,
    /// watts
    pub rx_power: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            tx_range: 200.0,
            interference_range: 500.0,
            bitrate: 2_000_000,
            prop_delay: 2.5e-6,
            tx_power: 0.660,
            rx_power: 0.395,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("radio.tx_range", self.tx_range),
            ("radio.interference_range", self.interference_range),
            ("radio.prop_delay", self.prop_delay),
            ("radio.tx_power", self.tx_power),
            ("radio.rx_power", self.rx_power),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::invalid(key, "must be a positive finite number"));
            }
        }
        if self.bitrate == 0 {
            return Err(ConfigError::invalid("radio.bitrate", "must be positive"));
        }
        if self.tx_range > self.interference_range {
            return Err(ConfigError::invalid(
                "radio.tx_range",
                "must not exceed radio.interference_range",
            ));
        }
        if (8 * TICKS_PER_SECOND) % self.bitrate != 0 {
            return Err(ConfigError::invalid(
                "radio.bitrate",
                "one byte of airtime must be a whole number of 100 ns ticks",
            ));
        }
        if SimTime::exact_from_secs_f64(self.prop_delay).is_none() {
            return Err(ConfigError::invalid(
                "radio.prop_delay",
                "must be a multiple of 100 ns",
            ));
        }
        Ok(())
    }

    pub fn prop_delay_ticks(&self) -> SimTime {
        SimTime::from_secs_f64(self.prop_delay)
    }

    /// Airtime of a frame of `size` bytes: `size * 8 / bitrate`.
    ///
    /// Panics on a zero-size frame.
    pub fn tx_duration(&self, size: u32) -> SimTime {
        assert!(size > 0, "zero-size frame has no airtime");
        let ticks_per_byte = 8 * TICKS_PER_SECOND / self.bitrate;
        SimTime(size as u64 * ticks_per_byte)
    }

    /// Whether two radios at `a` and `b` can hear each other.
    pub fn can_receive(&self, a: Position, b: Position) -> bool {
        a.distance(b) <= self.tx_range
    }

    pub fn interferes(&self, a: Position, b: Position) -> bool {
        a.distance(b) <= self.interference_range
    }

    /// Packets per second that saturate the channel at `packet_size` bytes.
    pub fn rate_cap(&self, packet_size: u32) -> f64 {
        self.bitrate as f64 / (8.0 * packet_size as f64)
    }
}

/// What a frame carries, for energy attribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrafficClass {
    Data,
    Probe,
    AckRate,
    Elfn,
    RouteControl,
}

impl TrafficClass {
    pub const ALL: [TrafficClass; 5] = [
        TrafficClass::Data,
        TrafficClass::Probe,
        TrafficClass::AckRate,
        TrafficClass::Elfn,
        TrafficClass::RouteControl,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TrafficClass::Data => "data",
            TrafficClass::Probe => "probe",
            TrafficClass::AckRate => "ack_rate",
            TrafficClass::Elfn => "elfn",
            TrafficClass::RouteControl => "route_ctl",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        TrafficClass::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

/// Transmit and receive energy spent by one node.
///
/// Airtime is accumulated in integer ticks per traffic class, so the class
/// shares always sum exactly to the totals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyLedger {
    tx_ticks: [u64; 5],
    rx_ticks: [u64; 5],
}

impl EnergyLedger {
    pub fn charge_tx(&mut self, class: TrafficClass, airtime: SimTime) {
        self.tx_ticks[class.index()] += airtime.ticks();
    }

    pub fn charge_rx(&mut self, class: TrafficClass, airtime: SimTime) {
        self.rx_ticks[class.index()] += airtime.ticks();
    }

    pub fn tx_airtime(&self) -> SimTime {
        SimTime(self.tx_ticks.iter().sum())
    }

    pub fn rx_airtime(&self) -> SimTime {
        SimTime(self.rx_ticks.iter().sum())
    }

    pub fn class_tx_airtime(&self, class: TrafficClass) -> SimTime {
        SimTime(self.tx_ticks[class.index()])
    }

    pub fn class_rx_airtime(&self, class: TrafficClass) -> SimTime {
        SimTime(self.rx_ticks[class.index()])
    }

    /// Joules spent transmitting.
    pub fn e_tx(&self, radio: &RadioParams) -> f64 {
        radio.tx_power * self.tx_airtime().as_secs_f64()
    }

    /// Joules spent receiving.
    pub fn e_rx(&self, radio: &RadioParams) -> f64 {
        radio.rx_power * self.rx_airtime().as_secs_f64()
    }

    pub fn total(&self, radio: &RadioParams) -> f64 {
        self.e_tx(radio) + self.e_rx(radio)
    }

    pub fn class_energy(&self, class: TrafficClass, radio: &RadioParams) -> f64 {
        radio.tx_power * self.class_tx_airtime(class).as_secs_f64()
            + radio.rx_power * self.class_rx_airtime(class).as_secs_f64()
    }
}

#[derive(Debug, Clone)]
pub struct Queued<P> {
    pub packet: P,
    pub enqueued_at: SimTime,
    /// Earliest instant the packet may contend (enqueue time plus any
    /// scripted per-node hold).
    pub eligible_at: SimTime,
}

/// Drop-tail FIFO of outbound frames.
#[derive(Debug, Clone)]
pub struct MacQueue<P> {
    pending: VecDeque<Queued<P>>,
    capacity: usize,
}

impl<P> MacQueue<P> {
    pub fn new(capacity: usize) -> Self {
        MacQueue {
            pending: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends a frame, handing it back if the queue is full.
    pub fn push(&mut self, packet: P, now: SimTime, hold: SimTime) -> Result<(), P> {
        if self.pending.len() >= self.capacity {
            return Err(packet);
        }
        self.pending.push_back(Queued {
            packet,
            enqueued_at: now,
            eligible_at: now + hold,
        });
        Ok(())
    }

    pub fn head(&self) -> Option<&Queued<P>> {
        self.pending.front()
    }

    pub fn pop(&mut self) -> Option<Queued<P>> {
        self.pending.pop_front()
    }

    /// Removes every queued frame matching `pred`, in queue order.
    pub fn drain_matching(&mut self, mut pred: impl FnMut(&P) -> bool) -> Vec<Queued<P>> {
        let mut kept = VecDeque::with_capacity(self.pending.len());
        let mut removed = Vec::new();
        for q in self.pending.drain(..) {
            if pred(&q.packet) {
                removed.push(q);
            } else {
                kept.push_back(q);
            }
        }
        self.pending = kept;
        removed
    }

    pub fn iter(&self) -> impl Iterator<Item = &Queued<P>> {
        self.pending.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacState {
    /// Nothing to send.
    Idle,
    /// Head frame ready but a transmitter is within interference range.
    Blocked { since: SimTime },
    /// Medium went idle; will re-check at `attempt_at`.
    Backoff { since: SimTime, attempt_at: SimTime },
    Transmitting { until: SimTime },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    /// Transmission may start now; `contention` is the wait since the frame
    /// reached the head of the queue.
    Granted { contention: SimTime },
    /// Medium busy; the node will be re-evaluated when a transmission ends.
    Blocked,
    /// Medium idle after a busy period; attempt again at the given instant.
    Backoff { attempt_at: SimTime },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Airing {
    pub node: NodeId,
    pub start: SimTime,
    pub end: SimTime,
}

/// Carrier-sense medium shared by all nodes.
///
/// A node may start transmitting only when no active transmitter lies within
/// `interference_range` of it. A node that finds the medium idle on request
/// transmits at once; a node that had to wait draws a uniform jitter in
/// `[0, jitter_max)` after the medium clears, which separates simultaneous
/// waiters.
#[derive(Debug, Clone)]
pub struct Medium {
    interference_range: f64,
    jitter_ticks: u64,
    active: Vec<Airing>,
    states: Vec<MacState>,
}

impl Medium {
    pub fn new(node_count: usize, interference_range: f64, jitter_max: SimTime) -> Self {
        Medium {
            interference_range,
            jitter_ticks: jitter_max.ticks(),
            active: Vec::new(),
            states: vec![MacState::Idle; node_count],
        }
    }

    pub fn state(&self, node: NodeId) -> MacState {
        self.states[node]
    }

    pub fn active(&self) -> &[Airing] {
        &self.active
    }

    /// Whether no other node within interference range of `node` is on air.
    pub fn is_idle_for(&self, node: NodeId, positions: &[Position]) -> bool {
        let me = positions[node];
        !self.active.iter().any(|a| {
            a.node != node && me.distance(positions[a.node]) <= self.interference_range
        })
    }

    /// Latest end time among transmitters blocking `node`, if any.
    pub fn busy_until(&self, node: NodeId, positions: &[Position]) -> Option<SimTime> {
        let me = positions[node];
        self.active
            .iter()
            .filter(|a| a.node != node && me.distance(positions[a.node]) <= self.interference_range)
            .map(|a| a.end)
            .max()
    }

    fn draw_jitter(&self, now: SimTime, rng: &mut RngStream) -> SimTime {
        if self.jitter_ticks == 0 {
            now
        } else {
            now + SimTime(rng.below(self.jitter_ticks))
        }
    }

    fn contender_nearby(&self, node: NodeId, positions: &[Position]) -> bool {
        let me = positions[node];
        self.states.iter().enumerate().any(|(n, st)| {
            n != node
                && matches!(st, MacState::Backoff { .. })
                && me.distance(positions[n]) <= self.interference_range
        })
    }

    /// A node's head frame became ready at `since` and asks for the medium at
    /// `now`. An idle neighbourhood with no backed-off contenders grants at
    /// once; an idle one with contenders joins them with a fresh jitter draw.
    pub fn request(
        &mut self,
        node: NodeId,
        since: SimTime,
        now: SimTime,
        positions: &[Position],
        rng: &mut RngStream,
    ) -> Access {
        debug_assert!(
            matches!(self.states[node], MacState::Idle),
            "request from node {node} in state {:?}",
            self.states[node]
        );
        if !self.is_idle_for(node, positions) {
            self.states[node] = MacState::Blocked { since };
            Access::Blocked
        } else if self.contender_nearby(node, positions) {
            let attempt_at = self.draw_jitter(now, rng);
            self.states[node] = MacState::Backoff { since, attempt_at };
            Access::Backoff { attempt_at }
        } else {
            Access::Granted {
                contention: now - since,
            }
        }
    }

    /// A node that has just finished transmitting and still has frames
    /// queued backs off before its next attempt.
    pub fn resume(&mut self, node: NodeId, since: SimTime, now: SimTime, positions: &[Position], rng: &mut RngStream) -> Access {
        debug_assert!(matches!(self.states[node], MacState::Idle));
        if self.is_idle_for(node, positions) {
            let attempt_at = self.draw_jitter(now, rng);
            self.states[node] = MacState::Backoff { since, attempt_at };
            Access::Backoff { attempt_at }
        } else {
            self.states[node] = MacState::Blocked { since };
            Access::Blocked
        }
    }

    /// A backed-off node re-checks the medium at its attempt instant.
    pub fn attempt(&mut self, node: NodeId, now: SimTime, positions: &[Position]) -> Access {
        let since = match self.states[node] {
            MacState::Backoff { since, attempt_at } if attempt_at == now => since,
            // stale wake-up
            _ => return Access::Blocked,
        };
        if self.is_idle_for(node, positions) {
            self.states[node] = MacState::Idle;
            Access::Granted {
                contention: now - since,
            }
        } else {
            self.states[node] = MacState::Blocked { since };
            Access::Blocked
        }
    }

    /// Marks `node` on air over `[start, end)`. Fails if it would overlap an
    /// interfering transmission.
    pub fn begin(&mut self, node: NodeId, start: SimTime, end: SimTime, positions: &[Position]) {
        assert!(
            self.is_idle_for(node, positions),
            "node {node} granted the medium while an interferer is on air"
        );
        self.active.push(Airing { node, start, end });
        self.states[node] = MacState::Transmitting { until: end };
    }

    /// Ends `node`'s transmission. Returns the blocked nodes that now see an
    /// idle medium together with their attempt instants.
    pub fn end(
        &mut self,
        node: NodeId,
        now: SimTime,
        positions: &[Position],
        rng: &mut RngStream,
    ) -> Vec<(NodeId, SimTime)> {
        self.active.retain(|a| a.node != node);
        self.states[node] = MacState::Idle;
        let mut wakeups = Vec::new();
        for n in 0..self.states.len() {
            if let MacState::Blocked { since } = self.states[n] {
                if self.is_idle_for(n, positions) {
                    let attempt_at = self.draw_jitter(now, rng);
                    self.states[n] = MacState::Backoff { since, attempt_at };
                    wakeups.push((n, attempt_at));
                }
            }
        }
        wakeups
    }
}
