//! Shortest-hop source routing over the instantaneous connectivity graph,
//! with a per-flow route cache and link-failure notification.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::Arc;

use crate::channel::RadioParams;
use crate::mobility::Position;
use crate::sim::SimTime;
use crate::{FlowId, NodeId};

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub hops: Arc<[NodeId]>,
    pub established_at: SimTime,
    /// Distinguishes successive routes of one flow.
    pub generation: u64,
}

impl Route {
    pub fn hop_count(&self) -> usize {
        self.hops.len().saturating_sub(1)
    }

    pub fn source(&self) -> NodeId {
        self.hops[0]
    }

    pub fn destination(&self) -> NodeId {
        *self.hops.last().expect("empty route")
    }

    pub fn uses_link(&self, a: NodeId, b: NodeId) -> bool {
        self.hops
            .windows(2)
            .any(|w| (w[0] == a && w[1] == b) || (w[0] == b && w[1] == a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LinkBreakNotice {
    pub flow: FlowId,
    pub upstream: NodeId,
    pub downstream: NodeId,
    pub route_generation: u64,
    pub detected_at: SimTime,
}

/// How the sender learns about a break.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ElfnDelivery {
    /// The break is on the sender's own first hop.
    Local,
    /// An ELFN travels along these nodes, upstream node first, sender last.
    Relay(Vec<NodeId>),
    /// This break was already reported for the flow.
    Duplicate,
}

/// Breadth-first shortest-hop path from `src` to `dst` over links no longer
/// than the transmission range. Neighbours expand in ascending id order, so
/// the result is a deterministic function of the positions.
pub fn find_route(src: NodeId, dst: NodeId, positions: &[Position], radio: &RadioParams) -> Option<Vec<NodeId>> {
    if src == dst {
        return Some(vec![src]);
    }
    let n = positions.len();
    let mut parent = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut frontier = VecDeque::new();
    seen[src] = true;
    frontier.push_back(src);
    while let Some(u) = frontier.pop_front() {
        for v in 0..n {
            if seen[v] || !radio.can_receive(positions[u], positions[v]) {
                continue;
            }
            seen[v] = true;
            parent[v] = u;
            if v == dst {
                let mut path = vec![dst];
                let mut cur = dst;
                while cur != src {
                    cur = parent[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            frontier.push_back(v);
        }
    }
    None
}

/// Latency charged for discovering `hops`: a request and a reply crossing
/// every link once each.
pub fn discovery_latency(hops: &[NodeId], radio: &RadioParams, control_size: u32) -> SimTime {
    let links = hops.len().saturating_sub(1) as u64;
    let per_link = radio.tx_duration(control_size) + radio.prop_delay_ticks();
    SimTime(2 * links * per_link.ticks())
}

/// Route cache and break bookkeeping.
#[derive(Debug, Default)]
pub struct Routing {
    cache: HashMap<FlowId, Route>,
    next_generation: u64,
    reported: HashSet<(FlowId, u64)>,
    broken: HashSet<(FlowId, u64)>,
}

impl Routing {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cached(&self, flow: FlowId) -> Option<&Route> {
        self.cache.get(&flow)
    }

    /// Computes and caches a fresh route for `flow`.
    pub fn establish(
        &mut self,
        flow: FlowId,
        src: NodeId,
        dst: NodeId,
        now: SimTime,
        positions: &[Position],
        radio: &RadioParams,
    ) -> Option<Route> {
        let hops = find_route(src, dst, positions, radio)?;
        self.next_generation += 1;
        let route = Route {
            hops: hops.into(),
            established_at: now,
            generation: self.next_generation,
        };
        self.cache.insert(flow, route.clone());
        Some(route)
    }

    pub fn invalidate(&mut self, flow: FlowId) {
        self.cache.remove(&flow);
    }

    /// Whether packets of `flow` on route `generation` must no longer be
    /// forwarded.
    pub fn is_broken(&self, flow: FlowId, generation: u64) -> bool {
        self.broken.contains(&(flow, generation))
    }

    /// Handles a failed forward transmission of `flow` on the route
    /// `route_hops`: invalidates the cached route (if it is the broken one)
    /// and decides how the sender is told.
    pub fn on_link_break(&mut self, notice: LinkBreakNotice, route_hops: &[NodeId]) -> ElfnDelivery {
        let key = (notice.flow, notice.route_generation);
        self.broken.insert(key);
        if self
            .cache
            .get(&notice.flow)
            .is_some_and(|r| r.generation == notice.route_generation)
        {
            self.cache.remove(&notice.flow);
        }
        if !self.reported.insert(key) {
            return ElfnDelivery::Duplicate;
        }
        let idx = route_hops
            .iter()
            .position(|&n| n == notice.upstream)
            .expect("upstream node not on route");
        if idx == 0 {
            ElfnDelivery::Local
        } else {
            ElfnDelivery::Relay(route_hops[..=idx].iter().rev().copied().collect())
        }
    }
}
