//! Event-driven wiring of mobility, medium access, routing and transport for
//! one scenario run.

use std::collections::HashSet;
use std::sync::Arc;

use crate::channel::{Access, EnergyLedger, MacQueue, MacState, Medium, RadioParams, TrafficClass};
use crate::config::{Protocol, ScenarioConfig};
use crate::error::SimError;
use crate::mobility::{Grid, Mobility, Position};
use crate::routing::{discovery_latency, find_route, ElfnDelivery, LinkBreakNotice, Route, Routing};
use crate::sim::{EventQueue, RngStream, SimTime};
use crate::trace::{DropReason, Record, ReprobeCause, RunLog};
use crate::transport::{
    stamp_congestion, AckInfo, Arrival, FeedbackMode, FeedbackTrigger, Liveness, LivenessAction, NodeDelayEstimator,
    Packet, PacketKind, Phase, ReceiverState, SenderParams, SenderState,
};
use crate::{FlowId, NodeId};

/// Draws allowed when picking a connected source/destination pair.
pub const MAX_PAIR_ATTEMPTS: u32 = 100;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Sample per-node energy and positions every `metrics.sample_interval`.
    pub traces: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySample {
    pub tick: SimTime,
    pub node: NodeId,
    pub e_tx: f64,
    pub e_rx: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionSample {
    pub tick: SimTime,
    pub node: NodeId,
    pub position: Position,
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ScenarioConfig,
    pub log: RunLog,
    pub ledgers: Vec<EnergyLedger>,
    pub flow_pairs: Vec<(NodeId, NodeId)>,
    pub mobility_hash: String,
    pub energy_trace: Vec<EnergySample>,
    pub mobility_trace: Vec<PositionSample>,
    pub events_executed: u64,
}

#[derive(Debug)]
enum Ev {
    StartProbe { flow: FlowId },
    ProbeSend { flow: FlowId, gen: u64 },
    ProbeTimeout { flow: FlowId, gen: u64 },
    SenderTick { flow: FlowId, gen: u64 },
    Liveness { flow: FlowId },
    Epoch { flow: FlowId },
    MacWake { node: NodeId },
    MacAttempt { node: NodeId },
    TxEnd { node: NodeId },
    Deliver(Box<Packet>),
    AppStop,
    Sample,
}

struct NodeState {
    queue: MacQueue<Packet>,
    estimator: NodeDelayEstimator,
    ledger: EnergyLedger,
    hold: SimTime,
    free_since: SimTime,
    on_air: Option<Packet>,
    wake_at: Option<SimTime>,
}

struct FlowState {
    src: NodeId,
    dst: NodeId,
    sender: SenderState,
    receiver: ReceiverState,
    route: Option<Route>,
    tick_gen: u64,
    probe_gen: u64,
    /// Reverse of the route the newest DATA or PROBE arrived on.
    ack_route: Option<(u64, Arc<[NodeId]>)>,
    epoch_armed: bool,
    /// DATA copies scheduled for delivery but not yet received.
    propagating: u64,
}

struct Simulation {
    cfg: ScenarioConfig,
    radio: RadioParams,
    queue: EventQueue<Ev>,
    mobility: Mobility,
    pos: Vec<Position>,
    pos_at: Option<SimTime>,
    medium: Medium,
    routing: Routing,
    broken_links: HashSet<(FlowId, u64, NodeId, NodeId)>,
    nodes: Vec<NodeState>,
    flows: Vec<FlowState>,
    jitter: RngStream,
    loss: RngStream,
    log: RunLog,
    next_uid: u64,
    energy_trace: Vec<EnergySample>,
    mobility_trace: Vec<PositionSample>,
}

/// Picks `count` source/destination pairs that are connected at time zero.
pub fn draw_flow_pairs(
    count: usize,
    positions: &[Position],
    radio: &RadioParams,
    seed: u64,
) -> Result<Vec<(NodeId, NodeId)>, SimError> {
    let mut rng = RngStream::new(seed, "flows");
    let n = positions.len() as u64;
    (0..count)
        .map(|flow| {
            for _ in 0..MAX_PAIR_ATTEMPTS {
                let src = rng.below(n) as NodeId;
                let dst = rng.below(n) as NodeId;
                if src != dst && find_route(src, dst, positions, radio).is_some() {
                    return Ok((src, dst));
                }
            }
            Err(SimError::NoConnectedPair {
                flow,
                attempts: MAX_PAIR_ATTEMPTS,
            })
        })
        .collect()
}

/// Runs one scenario to completion.
pub fn simulate(cfg: &ScenarioConfig, opts: RunOptions) -> Result<RunOutput, SimError> {
    let mut sim = Simulation::new(cfg.clone(), opts)?;
    let end = cfg.duration();
    while let Some(ev) = sim.queue.pop_until(end) {
        sim.handle(ev.payload);
    }
    Ok(sim.finish(end))
}

impl Simulation {
    fn new(cfg: ScenarioConfig, opts: RunOptions) -> Result<Self, SimError> {
        cfg.validate()?;
        let sc = &cfg.scenario;
        let n = sc.node_count;
        let grid = Grid {
            width: sc.grid_width,
            height: sc.grid_height,
        };
        let topo = &cfg.topology;
        let mut mobility = if topo.positions.is_empty() {
            Mobility::random_waypoint(grid, n, sc.speed, sc.seed)
        } else {
            if topo.positions.len() != n {
                return Err(SimError::Topology(format!(
                    "{} positions given for {n} nodes",
                    topo.positions.len()
                )));
            }
            let pts: Vec<Position> = topo.positions.iter().map(|p| Position::new(p[0], p[1])).collect();
            Mobility::fixed(grid, &pts)
        };
        let pos: Vec<Position> = (0..n).map(|i| mobility.position_at(i, SimTime::ZERO)).collect();
        let radio = cfg.radio.clone();

        let pairs = if topo.flow_pairs.is_empty() {
            draw_flow_pairs(sc.flows, &pos, &radio, sc.seed)?
        } else {
            if topo.flow_pairs.len() != sc.flows {
                return Err(SimError::Topology(format!(
                    "{} flow pairs given for {} flows",
                    topo.flow_pairs.len(),
                    sc.flows
                )));
            }
            topo.flow_pairs
                .iter()
                .map(|&[s, d]| {
                    if s >= n || d >= n || s == d {
                        Err(SimError::Topology(format!("invalid flow pair [{s}, {d}]")))
                    } else {
                        Ok((s, d))
                    }
                })
                .collect::<Result<_, _>>()?
        };
        if !topo.node_hold.is_empty() && topo.node_hold.len() != n {
            return Err(SimError::Topology(format!(
                "{} hold times given for {n} nodes",
                topo.node_hold.len()
            )));
        }

        let tp = &cfg.transport;
        let rate_cap = cfg.rate_cap();
        let (mode, liveness) = match sc.protocol {
            Protocol::Atp => (
                FeedbackMode::EpochTimer { period: cfg.epoch() },
                Liveness::FeedbackPeriods { period: cfg.epoch() },
            ),
            Protocol::Drf => (
                FeedbackMode::Drf {
                    threshold: sc.drf_threshold,
                },
                Liveness::Watchdog {
                    timeout: SimTime::from_secs_f64(tp.liveness_timeout),
                },
            ),
        };
        let sender_params = SenderParams {
            increase_threshold_x: tp.x,
            increase_divisor_k: tp.k,
            rate_cap,
            liveness,
            retransmit_timeout: SimTime::from_secs_f64(tp.retransmit_timeout),
        };
        let flows = pairs
            .iter()
            .map(|&(src, dst)| FlowState {
                src,
                dst,
                sender: SenderState::new(sender_params),
                receiver: ReceiverState::new(mode, tp.alpha_r, rate_cap, tp.sack_every),
                route: None,
                tick_gen: 0,
                probe_gen: 0,
                ack_route: None,
                epoch_armed: false,
                propagating: 0,
            })
            .collect();
        let nodes = (0..n)
            .map(|i| NodeState {
                queue: MacQueue::new(cfg.mac.queue_capacity),
                estimator: NodeDelayEstimator::new(tp.alpha),
                ledger: EnergyLedger::default(),
                hold: topo
                    .node_hold
                    .get(i)
                    .map_or(SimTime::ZERO, |&h| SimTime::from_secs_f64(h)),
                free_since: SimTime::ZERO,
                on_air: None,
                wake_at: None,
            })
            .collect();

        let mut sim = Simulation {
            medium: Medium::new(n, radio.interference_range, SimTime::from_secs_f64(cfg.mac.jitter_max)),
            radio,
            queue: EventQueue::new(),
            mobility,
            pos,
            pos_at: Some(SimTime::ZERO),
            routing: Routing::new(),
            broken_links: HashSet::new(),
            nodes,
            flows,
            jitter: RngStream::new(sc.seed, "jitter"),
            loss: RngStream::new(sc.seed, "loss"),
            log: RunLog::default(),
            next_uid: 0,
            energy_trace: Vec::new(),
            mobility_trace: Vec::new(),
            cfg,
        };
        let check = SimTime::from_secs_f64(sim.cfg.transport.liveness_check_interval);
        for flow in 0..sim.flows.len() {
            sim.queue.schedule(SimTime::ZERO, Ev::StartProbe { flow });
            sim.queue.schedule(check, Ev::Liveness { flow });
        }
        if let Some(stop) = sim.cfg.scenario.app_stop {
            sim.queue.schedule(SimTime::from_secs_f64(stop), Ev::AppStop);
        }
        if opts.traces {
            sim.queue.schedule(SimTime::ZERO, Ev::Sample);
        }
        Ok(sim)
    }

    fn now(&self) -> SimTime {
        self.queue.now()
    }

    fn uid(&mut self) -> u64 {
        self.next_uid += 1;
        self.next_uid
    }

    fn refresh_positions(&mut self) {
        let now = self.queue.now();
        if self.pos_at != Some(now) {
            for (i, p) in self.pos.iter_mut().enumerate() {
                *p = self.mobility.position_at(i, now);
            }
            self.pos_at = Some(now);
        }
    }

    fn handle(&mut self, ev: Ev) {
        match ev {
            Ev::StartProbe { flow } => self.start_probe(flow),
            Ev::ProbeSend { flow, gen } => self.probe_send(flow, gen),
            Ev::ProbeTimeout { flow, gen } => {
                let f = &self.flows[flow];
                if gen == f.probe_gen && f.sender.phase() == Phase::Probe {
                    self.start_probe(flow);
                }
            }
            Ev::SenderTick { flow, gen } => self.sender_tick(flow, gen),
            Ev::Liveness { flow } => self.liveness(flow),
            Ev::Epoch { flow } => self.epoch_timer(flow),
            Ev::MacWake { node } => {
                if self.nodes[node].wake_at == Some(self.now()) {
                    self.nodes[node].wake_at = None;
                }
                self.kick(node);
            }
            Ev::MacAttempt { node } => self.mac_attempt(node),
            Ev::TxEnd { node } => self.tx_end(node),
            Ev::Deliver(pkt) => self.deliver(*pkt),
            Ev::AppStop => {
                for f in &mut self.flows {
                    f.sender.close_application();
                }
            }
            Ev::Sample => self.sample(),
        }
    }

    // ---- medium access ----

    /// Asks for the medium if `node` is idle with an eligible head frame.
    fn kick(&mut self, node: NodeId) {
        let now = self.now();
        let n = &self.nodes[node];
        if n.on_air.is_some() || self.medium.state(node) != MacState::Idle {
            return;
        }
        let Some(head) = n.queue.head() else {
            return;
        };
        let since = head.eligible_at.max(n.free_since);
        if since > now {
            if n.wake_at != Some(since) {
                self.nodes[node].wake_at = Some(since);
                self.queue.schedule(since, Ev::MacWake { node });
            }
            return;
        }
        self.refresh_positions();
        match self.medium.request(node, since, now, &self.pos, &mut self.jitter) {
            Access::Granted { contention } => self.transmit(node, contention),
            Access::Backoff { attempt_at } => {
                self.queue.schedule(attempt_at, Ev::MacAttempt { node });
            }
            Access::Blocked => {}
        }
    }

    fn mac_attempt(&mut self, node: NodeId) {
        self.refresh_positions();
        let now = self.now();
        if let Access::Granted { contention } = self.medium.attempt(node, now, &self.pos) {
            match self.nodes[node].queue.head() {
                Some(h) if h.eligible_at <= now => self.transmit(node, contention),
                Some(_) => self.kick(node),
                None => {}
            }
        }
    }

    fn transmit(&mut self, node: NodeId, contention: SimTime) {
        let now = self.now();
        let Some(queued) = self.nodes[node].queue.pop() else {
            return;
        };
        let mut pkt = queued.packet;
        let since = now - contention;
        let queue_delay = since.saturating_sub(queued.enqueued_at);
        let airtime = self.radio.tx_duration(pkt.size);
        let n = &mut self.nodes[node];
        let d_avg = n
            .estimator
            .update(queue_delay.as_secs_f64(), contention.as_secs_f64());
        let stamped = if pkt.kind.carries_congestion() {
            stamp_congestion(&mut pkt, &n.estimator);
            pkt.congestion_delay
        } else {
            0.0
        };
        let class = pkt.kind.traffic_class();
        n.ledger.charge_tx(class, airtime);
        self.log.push(Record::Tx {
            tick: now,
            node,
            to: pkt.next_hop().expect("frame at its destination was queued"),
            class,
            flow: pkt.flow,
            uid: pkt.uid,
            airtime,
            queue_delay,
            contention_delay: contention,
            d_avg,
            stamped,
        });
        self.refresh_positions();
        self.medium.begin(node, now, now + airtime, &self.pos);
        self.nodes[node].on_air = Some(pkt);
        self.queue.schedule(now + airtime, Ev::TxEnd { node });
    }

    fn tx_end(&mut self, node: NodeId) {
        let now = self.now();
        let pkt = self.nodes[node].on_air.take().expect("transmission end without a frame");
        self.nodes[node].free_since = now;
        self.refresh_positions();
        for (n, at) in self.medium.end(node, now, &self.pos, &mut self.jitter) {
            self.queue.schedule(at, Ev::MacAttempt { node: n });
        }
        if pkt.kind == PacketKind::Data {
            self.flows[pkt.flow].propagating += 1;
        }
        self.queue
            .schedule(now + self.radio.prop_delay_ticks(), Ev::Deliver(Box::new(pkt)));
        match self.nodes[node].queue.head() {
            Some(h) if h.eligible_at <= now => {
                if let Access::Backoff { attempt_at } = self.medium.resume(node, now, now, &self.pos, &mut self.jitter) {
                    self.queue.schedule(attempt_at, Ev::MacAttempt { node });
                }
            }
            Some(_) => self.kick(node),
            None => {}
        }
    }

    fn enqueue(&mut self, node: NodeId, pkt: Packet) {
        let now = self.now();
        let hold = self.nodes[node].hold;
        match self.nodes[node].queue.push(pkt, now, hold) {
            Ok(()) => self.kick(node),
            Err(pkt) => self.drop_packet(node, &pkt, DropReason::QueueFull),
        }
    }

    fn drop_packet(&mut self, node: NodeId, pkt: &Packet, reason: DropReason) {
        self.log.push(Record::Drop {
            tick: self.now(),
            node,
            class: pkt.kind.traffic_class(),
            flow: pkt.flow,
            uid: pkt.uid,
            reason,
        });
    }

    // ---- forwarding ----

    fn deliver(&mut self, mut pkt: Packet) {
        if pkt.kind == PacketKind::Data {
            self.flows[pkt.flow].propagating -= 1;
        }
        let from = pkt.holder();
        let to = pkt.next_hop().expect("delivery past the destination");
        self.refresh_positions();
        if !self.radio.can_receive(self.pos[from], self.pos[to]) {
            self.link_break(from, to, pkt);
            return;
        }
        let p = self.cfg.mac.per_hop_loss;
        if p > 0.0 && self.loss.bernoulli(p) {
            self.drop_packet(to, &pkt, DropReason::InjectedLoss);
            return;
        }
        let airtime = self.radio.tx_duration(pkt.size);
        let class = pkt.kind.traffic_class();
        self.nodes[to].ledger.charge_rx(class, airtime);
        self.log.push(Record::Rx {
            tick: self.now(),
            node: to,
            class,
            flow: pkt.flow,
            uid: pkt.uid,
            airtime,
        });
        pkt.hop += 1;
        if pkt.at_destination() {
            self.consume(pkt);
        } else {
            self.forward(to, pkt);
        }
    }

    fn forward(&mut self, node: NodeId, pkt: Packet) {
        if pkt.kind.carries_congestion() {
            let next = pkt.next_hop().expect("forwarding at destination");
            if self
                .broken_links
                .contains(&(pkt.flow, pkt.route_generation, node, next))
            {
                self.drop_packet(node, &pkt, DropReason::BrokenRoute);
                return;
            }
        }
        self.enqueue(node, pkt);
    }

    fn link_break(&mut self, upstream: NodeId, downstream: NodeId, pkt: Packet) {
        let now = self.now();
        let (flow, gen) = (pkt.flow, pkt.route_generation);
        self.log.push(Record::LinkBreak {
            tick: now,
            flow,
            upstream,
            downstream,
            class: pkt.kind.traffic_class(),
            generation: gen,
        });
        self.drop_packet(upstream, &pkt, DropReason::LinkBreak);
        if !pkt.kind.carries_congestion() {
            return;
        }
        self.broken_links.insert((flow, gen, upstream, downstream));
        let flushed = self.nodes[upstream].queue.drain_matching(|p| {
            p.kind.carries_congestion()
                && p.flow == flow
                && p.route_generation == gen
                && p.next_hop() == Some(downstream)
        });
        for q in flushed {
            self.drop_packet(upstream, &q.packet, DropReason::BrokenRoute);
        }
        let notice = LinkBreakNotice {
            flow,
            upstream,
            downstream,
            route_generation: gen,
            detected_at: now,
        };
        match self.routing.on_link_break(notice, &pkt.route) {
            ElfnDelivery::Local => self.on_elfn(flow, gen),
            ElfnDelivery::Relay(path) => {
                let uid = self.uid();
                let elfn = Packet {
                    kind: PacketKind::Elfn,
                    flow,
                    seq: 0,
                    size: self.cfg.transport.elfn_size,
                    congestion_delay: 0.0,
                    rate_feedback: 0.0,
                    sack_blocks: Vec::new(),
                    route: path.into(),
                    hop: 0,
                    route_generation: gen,
                    sent_at: now,
                    echo_sent_at: SimTime::ZERO,
                    uid,
                    probe_reply: false,
                };
                self.enqueue(upstream, elfn);
            }
            ElfnDelivery::Duplicate => {}
        }
    }

    // ---- transport endpoints ----

    fn note_arrival_route(&mut self, pkt: &Packet) {
        let f = &mut self.flows[pkt.flow];
        if f.ack_route.as_ref().map(|(g, _)| *g) != Some(pkt.route_generation) {
            let rev: Vec<NodeId> = pkt.route.iter().rev().copied().collect();
            f.ack_route = Some((pkt.route_generation, rev.into()));
        }
    }

    fn consume(&mut self, pkt: Packet) {
        let now = self.now();
        let flow = pkt.flow;
        match pkt.kind {
            PacketKind::Data => {
                self.note_arrival_route(&pkt);
                let f = &mut self.flows[flow];
                let out = f.receiver.on_data(pkt.seq, pkt.congestion_delay, pkt.sent_at);
                self.log.push(Record::Deliver {
                    tick: now,
                    flow,
                    node: f.dst,
                    seq: pkt.seq,
                    uid: pkt.uid,
                    duplicate: out.arrival == Arrival::Duplicate,
                    delay: pkt.congestion_delay,
                    rate: out.rate,
                });
                if let FeedbackMode::EpochTimer { period } = f.receiver.mode() {
                    if !f.epoch_armed {
                        f.epoch_armed = true;
                        self.queue.schedule(now + period, Ev::Epoch { flow });
                    }
                }
                if let Some(trigger) = out.feedback {
                    self.send_ack(flow, trigger, out.rate, false);
                }
            }
            PacketKind::Probe => {
                self.note_arrival_route(&pkt);
                let rate = self.flows[flow].receiver.probe_rate(pkt.congestion_delay);
                self.send_ack(flow, FeedbackTrigger::First, rate, true);
            }
            PacketKind::AckRate => self.on_ack(pkt),
            PacketKind::Elfn => {
                self.log.push(Record::ElfnDelivered {
                    tick: now,
                    flow,
                    node: self.flows[flow].src,
                    generation: pkt.route_generation,
                });
                self.on_elfn(flow, pkt.route_generation);
            }
        }
    }

    fn send_ack(&mut self, flow: FlowId, trigger: FeedbackTrigger, rate: f64, probe_reply: bool) {
        let now = self.now();
        let uid = self.uid();
        let size = self.cfg.transport.ack_size;
        let f = &mut self.flows[flow];
        let Some((gen, route)) = f.ack_route.clone() else {
            return;
        };
        let previous = f.receiver.r_last();
        f.receiver.record_feedback(rate, now);
        let sack_blocks = if f.receiver.received().is_empty() {
            Vec::new()
        } else {
            f.receiver.build_sack()
        };
        let pkt = Packet {
            kind: PacketKind::AckRate,
            flow,
            seq: 0,
            size,
            congestion_delay: 0.0,
            rate_feedback: rate,
            sack_blocks,
            route,
            hop: 0,
            route_generation: gen,
            sent_at: now,
            echo_sent_at: f.receiver.latest_sent_at(),
            uid,
            probe_reply,
        };
        let dst = f.dst;
        self.log.push(Record::Feedback {
            tick: now,
            flow,
            node: dst,
            trigger,
            rate,
            previous,
            uid,
        });
        self.enqueue(dst, pkt);
    }

    fn on_ack(&mut self, pkt: Packet) {
        let now = self.now();
        let flow = pkt.flow;
        let f = &mut self.flows[flow];
        let phase = f.sender.phase();
        let before = f.sender.rate();
        f.sender.on_ack(
            &AckInfo {
                rate: pkt.rate_feedback,
                sack_blocks: &pkt.sack_blocks,
                echo_sent_at: pkt.echo_sent_at,
            },
            now,
        );
        if phase == Phase::Probe {
            if !pkt.probe_reply || f.route.is_none() {
                return;
            }
            f.sender.on_probe_reply(pkt.rate_feedback, now);
            f.tick_gen += 1;
            let gen = f.tick_gen;
            self.queue.schedule(now, Ev::SenderTick { flow, gen });
        } else if f.sender.rate() == before {
            return;
        }
        let f = &self.flows[flow];
        self.log.push(Record::SenderRate {
            tick: now,
            flow,
            node: f.src,
            rate: f.sender.rate(),
        });
    }

    /// The sender learned that route `gen` broke.
    fn on_elfn(&mut self, flow: FlowId, gen: u64) {
        let now = self.now();
        let f = &mut self.flows[flow];
        if f.route.as_ref().map(|r| r.generation) != Some(gen) {
            return;
        }
        self.routing.invalidate(flow);
        f.route = None;
        f.sender.enter_probe();
        f.tick_gen += 1;
        self.log.push(Record::Reprobe {
            tick: now,
            flow,
            node: f.src,
            cause: ReprobeCause::Elfn,
        });
        self.start_probe(flow);
    }

    fn start_probe(&mut self, flow: FlowId) {
        let now = self.now();
        let f = &mut self.flows[flow];
        f.probe_gen += 1;
        let gen = f.probe_gen;
        let (src, dst) = (f.src, f.dst);
        let mut latency = SimTime::ZERO;
        let route = match self.routing.cached(flow) {
            Some(r) => Some(r.clone()),
            None => {
                self.refresh_positions();
                let r = self.routing.establish(flow, src, dst, now, &self.pos, &self.radio);
                if let Some(r) = &r {
                    latency = discovery_latency(&r.hops, &self.radio, self.cfg.transport.route_control_size);
                    self.charge_discovery(flow, r);
                }
                r
            }
        };
        let found = route.is_some();
        self.flows[flow].route = route;
        if found {
            self.queue.schedule(now + latency, Ev::ProbeSend { flow, gen });
        }
        let retry = now + latency + SimTime::from_secs_f64(self.cfg.transport.probe_interval);
        self.queue.schedule(retry, Ev::ProbeTimeout { flow, gen });
    }

    /// Route request and reply, one control frame per link each way.
    fn charge_discovery(&mut self, flow: FlowId, route: &Route) {
        let now = self.now();
        self.log.push(Record::RouteFound {
            tick: now,
            flow,
            node: route.source(),
            hops: route.hops.to_vec(),
            generation: route.generation,
        });
        let airtime = self.radio.tx_duration(self.cfg.transport.route_control_size);
        let class = TrafficClass::RouteControl;
        let forward = route.hops.windows(2).map(|w| (w[0], w[1]));
        let back = route.hops.windows(2).rev().map(|w| (w[1], w[0]));
        let links: Vec<(NodeId, NodeId)> = forward.chain(back).collect();
        for (a, b) in links {
            let uid = self.uid();
            self.nodes[a].ledger.charge_tx(class, airtime);
            self.log.push(Record::Tx {
                tick: now,
                node: a,
                to: b,
                class,
                flow,
                uid,
                airtime,
                queue_delay: SimTime::ZERO,
                contention_delay: SimTime::ZERO,
                d_avg: self.nodes[a].estimator.d_avg(),
                stamped: 0.0,
            });
            self.nodes[b].ledger.charge_rx(class, airtime);
            self.log.push(Record::Rx {
                tick: now,
                node: b,
                class,
                flow,
                uid,
                airtime,
            });
        }
    }

    fn probe_send(&mut self, flow: FlowId, gen: u64) {
        let now = self.now();
        let f = &self.flows[flow];
        if gen != f.probe_gen || f.sender.phase() != Phase::Probe {
            return;
        }
        let Some(route) = f.route.clone() else {
            return;
        };
        let src = f.src;
        let uid = self.uid();
        let pkt = Packet {
            kind: PacketKind::Probe,
            flow,
            seq: 0,
            size: self.cfg.transport.probe_size,
            congestion_delay: 0.0,
            rate_feedback: 0.0,
            sack_blocks: Vec::new(),
            route: route.hops,
            hop: 0,
            route_generation: route.generation,
            sent_at: now,
            echo_sent_at: SimTime::ZERO,
            uid,
            probe_reply: false,
        };
        self.enqueue(src, pkt);
    }

    fn sender_tick(&mut self, flow: FlowId, gen: u64) {
        let now = self.now();
        let f = &mut self.flows[flow];
        if gen != f.tick_gen || f.sender.phase() != Phase::Connected {
            return;
        }
        let Some(route) = f.route.clone() else {
            return;
        };
        let interval = f.sender.send_interval();
        self.queue.schedule(now + interval, Ev::SenderTick { flow, gen });
        let Some(e) = self.flows[flow].sender.emit(now) else {
            return;
        };
        let uid = self.uid();
        let src = self.flows[flow].src;
        self.log.push(Record::Send {
            tick: now,
            flow,
            node: src,
            seq: e.seq,
            uid,
            retransmission: e.retransmission,
            route_generation: route.generation,
        });
        let pkt = Packet {
            kind: PacketKind::Data,
            flow,
            seq: e.seq,
            size: self.cfg.transport.data_size,
            congestion_delay: 0.0,
            rate_feedback: 0.0,
            sack_blocks: Vec::new(),
            route: route.hops,
            hop: 0,
            route_generation: route.generation,
            sent_at: now,
            echo_sent_at: SimTime::ZERO,
            uid,
            probe_reply: false,
        };
        self.enqueue(src, pkt);
    }

    fn liveness(&mut self, flow: FlowId) {
        let now = self.now();
        let check = SimTime::from_secs_f64(self.cfg.transport.liveness_check_interval);
        self.queue.schedule(now + check, Ev::Liveness { flow });
        let f = &mut self.flows[flow];
        match f.sender.liveness_check(now) {
            LivenessAction::None => {}
            LivenessAction::Decreased { rate } => {
                self.log.push(Record::SenderRate {
                    tick: now,
                    flow,
                    node: f.src,
                    rate,
                });
            }
            LivenessAction::Reprobe => {
                f.tick_gen += 1;
                self.log.push(Record::Reprobe {
                    tick: now,
                    flow,
                    node: f.src,
                    cause: ReprobeCause::Liveness,
                });
                self.start_probe(flow);
            }
        }
    }

    fn epoch_timer(&mut self, flow: FlowId) {
        let now = self.now();
        let f = &self.flows[flow];
        let FeedbackMode::EpochTimer { period } = f.receiver.mode() else {
            return;
        };
        if f.receiver.epoch_feedback_due(now) {
            let rate = f.receiver.current_rate();
            self.send_ack(flow, FeedbackTrigger::Epoch, rate, false);
            self.queue.schedule(now + period, Ev::Epoch { flow });
        } else {
            let next = f.receiver.last_ack_at().map_or(now, |t| t + period);
            self.queue.schedule(next.max(now + SimTime::TICK), Ev::Epoch { flow });
        }
    }

    fn sample(&mut self) {
        let now = self.now();
        self.refresh_positions();
        for (i, n) in self.nodes.iter().enumerate() {
            self.energy_trace.push(EnergySample {
                tick: now,
                node: i,
                e_tx: n.ledger.e_tx(&self.radio),
                e_rx: n.ledger.e_rx(&self.radio),
            });
            self.mobility_trace.push(PositionSample {
                tick: now,
                node: i,
                position: self.pos[i],
            });
        }
        let step = SimTime::from_secs_f64(self.cfg.metrics.sample_interval);
        self.queue.schedule(now + step, Ev::Sample);
    }

    fn finish(mut self, end: SimTime) -> RunOutput {
        for flow in 0..self.flows.len() {
            let queued: u64 = self
                .nodes
                .iter()
                .map(|n| {
                    let in_queue = n
                        .queue
                        .iter()
                        .filter(|q| q.packet.kind == PacketKind::Data && q.packet.flow == flow)
                        .count() as u64;
                    let on_air = n
                        .on_air
                        .as_ref()
                        .is_some_and(|p| p.kind == PacketKind::Data && p.flow == flow);
                    in_queue + u64::from(on_air)
                })
                .sum();
            let f = &self.flows[flow];
            self.log.push(Record::FlowEnd {
                tick: end,
                flow,
                node: f.src,
                in_flight: queued + f.propagating,
            });
        }
        let mobility_hash = self.mobility.trajectory_hash(end);
        RunOutput {
            flow_pairs: self.flows.iter().map(|f| (f.src, f.dst)).collect(),
            ledgers: self.nodes.into_iter().map(|n| n.ledger).collect(),
            log: self.log,
            mobility_hash,
            energy_trace: self.energy_trace,
            mobility_trace: self.mobility_trace,
            events_executed: self.queue.executed(),
            config: self.cfg,
        }
    }
}
