use std::fmt;
use std::sync::Arc;

use crate::channel::TrafficClass;
use crate::sim::SimTime;
use crate::{FlowId, NodeId};

use super::delay::NodeDelayEstimator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PacketKind {
    Data,
    Probe,
    AckRate,
    Elfn,
}

impl PacketKind {
    pub fn traffic_class(self) -> TrafficClass {
        match self {
            PacketKind::Data => TrafficClass::Data,
            PacketKind::Probe => TrafficClass::Probe,
            PacketKind::AckRate => TrafficClass::AckRate,
            PacketKind::Elfn => TrafficClass::Elfn,
        }
    }

    pub fn carries_congestion(self) -> bool {
        matches!(self, PacketKind::Data | PacketKind::Probe)
    }
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.traffic_class().as_str())
    }
}

/// A transport frame travelling along a source route.
#[derive(Debug, Clone)]
pub struct Packet {
    pub kind: PacketKind,
    pub flow: FlowId,
    /// DATA only.
    pub seq: u64,
    /// bytes
    pub size: u32,
    /// Largest per-node delay average seen so far on the path, seconds.
    pub congestion_delay: f64,
    /// ACK_RATE only, packets per second.
    pub rate_feedback: f64,
    /// ACK_RATE only: inclusive received ranges, sorted and disjoint.
    pub sack_blocks: Vec<(u64, u64)>,
    pub route: Arc<[NodeId]>,
    /// Index in `route` of the node currently holding the packet.
    pub hop: usize,
    pub route_generation: u64,
    /// When the transport sender emitted this copy.
    pub sent_at: SimTime,
    /// ACK_RATE only: `sent_at` of the newest DATA copy the receiver has seen.
    pub echo_sent_at: SimTime,
    /// Unique per transmitted copy.
    pub uid: u64,
    /// ACK_RATE answering a PROBE.
    pub probe_reply: bool,
}

impl Packet {
    pub fn holder(&self) -> NodeId {
        self.route[self.hop]
    }

    pub fn next_hop(&self) -> Option<NodeId> {
        self.route.get(self.hop + 1).copied()
    }

    pub fn at_destination(&self) -> bool {
        self.hop + 1 == self.route.len()
    }
}

/// Raises the packet's congestion field to the node's current delay average.
pub fn stamp_congestion(pkt: &mut Packet, est: &NodeDelayEstimator) {
    debug_assert!(pkt.kind.carries_congestion(), "{:?} carries no congestion field", pkt.kind);
    pkt.congestion_delay = pkt.congestion_delay.max(est.d_avg());
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(delay: f64) -> Packet {
        Packet {
            kind: PacketKind::Data,
            flow: 0,
            seq: 0,
            size: 512,
            congestion_delay: delay,
            rate_feedback: 0.0,
            sack_blocks: Vec::new(),
            route: Arc::from(vec![0, 1, 2]),
            hop: 0,
            route_generation: 1,
            sent_at: SimTime::ZERO,
            echo_sent_at: SimTime::ZERO,
            uid: 0,
            probe_reply: false,
        }
    }

    fn estimator(d: f64) -> NodeDelayEstimator {
        let mut e = NodeDelayEstimator::new(0.75);
        e.update(d, 0.0);
        e
    }

    #[test]
    fn stamp_keeps_the_larger_delay() {
        let mut p = data(0.005);
        stamp_congestion(&mut p, &estimator(0.003));
        assert_eq!(p.congestion_delay, 0.005);

        let mut p = data(0.002);
        stamp_congestion(&mut p, &estimator(0.007));
        assert_eq!(p.congestion_delay, 0.007);

        let mut p = data(0.0);
        stamp_congestion(&mut p, &estimator(0.004));
        assert_eq!(p.congestion_delay, 0.004);
    }

    #[test]
    fn route_navigation() {
        let mut p = data(0.0);
        assert_eq!(p.holder(), 0);
        assert_eq!(p.next_hop(), Some(1));
        p.hop = 2;
        assert!(p.at_destination());
        assert_eq!(p.next_hop(), None);
    }
}
