//! Structured run log and its CSV form.
//!
//! Every run records what happened on the air and at the transport
//! endpoints. Metrics are computed from this log alone, and the persisted
//! trace (`tick,event_kind,node_id,detail`) parses back to an identical log.

use std::io::{Read, Write};

use crate::channel::TrafficClass;
use crate::error::SimError;
use crate::sim::SimTime;
use crate::transport::FeedbackTrigger;
use crate::{FlowId, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    QueueFull,
    LinkBreak,
    InjectedLoss,
    /// Discarded at the upstream end of a reported break.
    BrokenRoute,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::QueueFull => "queue_full",
            DropReason::LinkBreak => "link_break",
            DropReason::InjectedLoss => "injected_loss",
            DropReason::BrokenRoute => "broken_route",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            DropReason::QueueFull,
            DropReason::LinkBreak,
            DropReason::InjectedLoss,
            DropReason::BrokenRoute,
        ]
        .into_iter()
        .find(|r| r.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReprobeCause {
    Elfn,
    Liveness,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    /// A frame went on air. Route-control frames have zero delays and do
    /// not occupy the medium.
    Tx {
        tick: SimTime,
        node: NodeId,
        to: NodeId,
        class: TrafficClass,
        flow: FlowId,
        uid: u64,
        airtime: SimTime,
        queue_delay: SimTime,
        contention_delay: SimTime,
        /// Node delay average after this frame's sample, seconds.
        d_avg: f64,
        /// Congestion field after stamping, seconds (0 for unstamped kinds).
        stamped: f64,
    },
    Rx {
        tick: SimTime,
        node: NodeId,
        class: TrafficClass,
        flow: FlowId,
        uid: u64,
        airtime: SimTime,
    },
    Drop {
        tick: SimTime,
        node: NodeId,
        class: TrafficClass,
        flow: FlowId,
        uid: u64,
        reason: DropReason,
    },
    /// The transport sender emitted a DATA copy.
    Send {
        tick: SimTime,
        flow: FlowId,
        node: NodeId,
        seq: u64,
        uid: u64,
        retransmission: bool,
        route_generation: u64,
    },
    /// A DATA copy reached the receiver; `rate` is the collated rate after
    /// it (unchanged for duplicates).
    Deliver {
        tick: SimTime,
        flow: FlowId,
        node: NodeId,
        seq: u64,
        uid: u64,
        duplicate: bool,
        delay: f64,
        rate: f64,
    },
    Feedback {
        tick: SimTime,
        flow: FlowId,
        node: NodeId,
        trigger: FeedbackTrigger,
        rate: f64,
        previous: Option<f64>,
        uid: u64,
    },
    SenderRate {
        tick: SimTime,
        flow: FlowId,
        node: NodeId,
        rate: f64,
    },
    RouteFound {
        tick: SimTime,
        flow: FlowId,
        node: NodeId,
        hops: Vec<NodeId>,
        generation: u64,
    },
    LinkBreak {
        tick: SimTime,
        flow: FlowId,
        upstream: NodeId,
        downstream: NodeId,
        class: TrafficClass,
        generation: u64,
    },
    ElfnDelivered {
        tick: SimTime,
        flow: FlowId,
        node: NodeId,
        generation: u64,
    },
    Reprobe {
        tick: SimTime,
        flow: FlowId,
        node: NodeId,
        cause: ReprobeCause,
    },
    /// End-of-run accounting: DATA copies still queued or on air.
    FlowEnd {
        tick: SimTime,
        flow: FlowId,
        node: NodeId,
        in_flight: u64,
    },
}

impl Record {
    pub fn tick(&self) -> SimTime {
        match self {
            Record::Tx { tick, .. }
            | Record::Rx { tick, .. }
            | Record::Drop { tick, .. }
            | Record::Send { tick, .. }
            | Record::Deliver { tick, .. }
            | Record::Feedback { tick, .. }
            | Record::SenderRate { tick, .. }
            | Record::RouteFound { tick, .. }
            | Record::LinkBreak { tick, .. }
            | Record::ElfnDelivered { tick, .. }
            | Record::Reprobe { tick, .. }
            | Record::FlowEnd { tick, .. } => *tick,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Record::Tx { .. } => "tx",
            Record::Rx { .. } => "rx",
            Record::Drop { .. } => "drop",
            Record::Send { .. } => "send",
            Record::Deliver { .. } => "deliver",
            Record::Feedback { .. } => "feedback",
            Record::SenderRate { .. } => "sender_rate",
            Record::RouteFound { .. } => "route_found",
            Record::LinkBreak { .. } => "link_break",
            Record::ElfnDelivered { .. } => "elfn_delivered",
            Record::Reprobe { .. } => "reprobe",
            Record::FlowEnd { .. } => "flow_end",
        }
    }

    fn node(&self) -> NodeId {
        match self {
            Record::Tx { node, .. }
            | Record::Rx { node, .. }
            | Record::Drop { node, .. }
            | Record::Send { node, .. }
            | Record::Deliver { node, .. }
            | Record::Feedback { node, .. }
            | Record::SenderRate { node, .. }
            | Record::RouteFound { node, .. }
            | Record::ElfnDelivered { node, .. }
            | Record::Reprobe { node, .. }
            | Record::FlowEnd { node, .. } => *node,
            Record::LinkBreak { upstream, .. } => *upstream,
        }
    }

    fn detail(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map_or_else(|| "-".to_string(), |v| v.to_string())
        }
        match self {
            Record::Tx {
                to,
                class,
                flow,
                uid,
                airtime,
                queue_delay,
                contention_delay,
                d_avg,
                stamped,
                ..
            } => format!(
                "to={to};class={};flow={flow};uid={uid};air={};q={};c={};d_avg={d_avg};stamped={stamped}",
                class.as_str(),
                airtime.ticks(),
                queue_delay.ticks(),
                contention_delay.ticks()
            ),
            Record::Rx {
                class,
                flow,
                uid,
                airtime,
                ..
            } => format!("class={};flow={flow};uid={uid};air={}", class.as_str(), airtime.ticks()),
            Record::Drop {
                class,
                flow,
                uid,
                reason,
                ..
            } => format!("class={};flow={flow};uid={uid};reason={}", class.as_str(), reason.as_str()),
            Record::Send {
                flow,
                seq,
                uid,
                retransmission,
                route_generation,
                ..
            } => format!(
                "flow={flow};seq={seq};uid={uid};retx={};gen={route_generation}",
                u8::from(*retransmission)
            ),
            Record::Deliver {
                flow,
                seq,
                uid,
                duplicate,
                delay,
                rate,
                ..
            } => format!(
                "flow={flow};seq={seq};uid={uid};dup={};delay={delay};rate={rate}",
                u8::from(*duplicate)
            ),
            Record::Feedback {
                flow,
                trigger,
                rate,
                previous,
                uid,
                ..
            } => format!(
                "flow={flow};trigger={};rate={rate};prev={};uid={uid}",
                trigger.as_str(),
                opt(*previous)
            ),
            Record::SenderRate { flow, rate, .. } => format!("flow={flow};rate={rate}"),
            Record::RouteFound {
                flow, hops, generation, ..
            } => format!(
                "flow={flow};gen={generation};hops={}",
                hops.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(" ")
            ),
            Record::LinkBreak {
                flow,
                downstream,
                class,
                generation,
                ..
            } => format!(
                "flow={flow};down={downstream};class={};gen={generation}",
                class.as_str()
            ),
            Record::ElfnDelivered { flow, generation, .. } => format!("flow={flow};gen={generation}"),
            Record::Reprobe { flow, cause, .. } => format!(
                "flow={flow};cause={}",
                match cause {
                    ReprobeCause::Elfn => "elfn",
                    ReprobeCause::Liveness => "liveness",
                }
            ),
            Record::FlowEnd { flow, in_flight, .. } => format!("flow={flow};in_flight={in_flight}"),
        }
    }
}

struct Fields<'a> {
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Fields<'a> {
    fn parse(detail: &'a str) -> Result<Self, SimError> {
        let pairs = detail
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|kv| {
                kv.split_once('=')
                    .ok_or_else(|| SimError::Trace(format!("malformed field `{kv}`")))
            })
            .collect::<Result<_, _>>()?;
        Ok(Fields { pairs })
    }

    fn raw(&self, key: &str) -> Result<&'a str, SimError> {
        self.pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| SimError::Trace(format!("missing field `{key}`")))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T, SimError> {
        let v = self.raw(key)?;
        v.parse()
            .map_err(|_| SimError::Trace(format!("bad value `{v}` for `{key}`")))
    }

    fn ticks(&self, key: &str) -> Result<SimTime, SimError> {
        Ok(SimTime(self.get(key)?))
    }

    fn flag(&self, key: &str) -> Result<bool, SimError> {
        Ok(self.get::<u8>(key)? != 0)
    }

    fn class(&self) -> Result<TrafficClass, SimError> {
        let v = self.raw("class")?;
        TrafficClass::parse(v).ok_or_else(|| SimError::Trace(format!("unknown class `{v}`")))
    }
}

fn parse_record(tick: SimTime, kind: &str, node: NodeId, detail: &str) -> Result<Record, SimError> {
    let f = Fields::parse(detail)?;
    let rec = match kind {
        "tx" => Record::Tx {
            tick,
            node,
            to: f.get("to")?,
            class: f.class()?,
            flow: f.get("flow")?,
            uid: f.get("uid")?,
            airtime: f.ticks("air")?,
            queue_delay: f.ticks("q")?,
            contention_delay: f.ticks("c")?,
            d_avg: f.get("d_avg")?,
            stamped: f.get("stamped")?,
        },
        "rx" => Record::Rx {
            tick,
            node,
            class: f.class()?,
            flow: f.get("flow")?,
            uid: f.get("uid")?,
            airtime: f.ticks("air")?,
        },
        "drop" => Record::Drop {
            tick,
            node,
            class: f.class()?,
            flow: f.get("flow")?,
            uid: f.get("uid")?,
            reason: DropReason::parse(f.raw("reason")?)
                .ok_or_else(|| SimError::Trace("unknown drop reason".into()))?,
        },
        "send" => Record::Send {
            tick,
            node,
            flow: f.get("flow")?,
            seq: f.get("seq")?,
            uid: f.get("uid")?,
            retransmission: f.flag("retx")?,
            route_generation: f.get("gen")?,
        },
        "deliver" => Record::Deliver {
            tick,
            node,
            flow: f.get("flow")?,
            seq: f.get("seq")?,
            uid: f.get("uid")?,
            duplicate: f.flag("dup")?,
            delay: f.get("delay")?,
            rate: f.get("rate")?,
        },
        "feedback" => Record::Feedback {
            tick,
            node,
            flow: f.get("flow")?,
            trigger: FeedbackTrigger::parse(f.raw("trigger")?)
                .ok_or_else(|| SimError::Trace("unknown trigger".into()))?,
            rate: f.get("rate")?,
            previous: match f.raw("prev")? {
                "-" => None,
                _ => Some(f.get("prev")?),
            },
            uid: f.get("uid")?,
        },
        "sender_rate" => Record::SenderRate {
            tick,
            node,
            flow: f.get("flow")?,
            rate: f.get("rate")?,
        },
        "route_found" => Record::RouteFound {
            tick,
            node,
            flow: f.get("flow")?,
            generation: f.get("gen")?,
            hops: f
                .raw("hops")?
                .split(' ')
                .map(|h| h.parse().map_err(|_| SimError::Trace(format!("bad hop `{h}`"))))
                .collect::<Result<_, _>>()?,
        },
        "link_break" => Record::LinkBreak {
            tick,
            upstream: node,
            flow: f.get("flow")?,
            downstream: f.get("down")?,
            class: f.class()?,
            generation: f.get("gen")?,
        },
        "elfn_delivered" => Record::ElfnDelivered {
            tick,
            node,
            flow: f.get("flow")?,
            generation: f.get("gen")?,
        },
        "reprobe" => Record::Reprobe {
            tick,
            node,
            flow: f.get("flow")?,
            cause: match f.raw("cause")? {
                "elfn" => ReprobeCause::Elfn,
                "liveness" => ReprobeCause::Liveness,
                other => return Err(SimError::Trace(format!("unknown cause `{other}`"))),
            },
        },
        "flow_end" => Record::FlowEnd {
            tick,
            node,
            flow: f.get("flow")?,
            in_flight: f.get("in_flight")?,
        },
        other => return Err(SimError::Trace(format!("unknown event kind `{other}`"))),
    };
    Ok(rec)
}

/// Everything a run recorded, in firing order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<Record>,
}

impl RunLog {
    pub fn push(&mut self, r: Record) {
        self.records.push(r);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Record> {
        self.records.iter()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SimError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["tick", "event_kind", "node_id", "detail"])?;
        for r in &self.records {
            out.write_record([
                r.tick().ticks().to_string(),
                r.kind().to_string(),
                r.node().to_string(),
                r.detail(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, SimError> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut log = RunLog::default();
        for row in rdr.records() {
            let row = row?;
            if row.len() != 4 {
                return Err(SimError::Trace(format!("expected 4 columns, got {}", row.len())));
            }
            let tick = SimTime(
                row[0]
                    .parse()
                    .map_err(|_| SimError::Trace(format!("bad tick `{}`", &row[0])))?,
            );
            let node = row[2]
                .parse()
                .map_err(|_| SimError::Trace(format!("bad node `{}`", &row[2])))?;
            log.push(parse_record(tick, &row[1], node, &row[3])?);
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunLog {
        let mut log = RunLog::default();
        log.push(Record::Tx {
            tick: SimTime(10),
            node: 0,
            to: 1,
            class: TrafficClass::Data,
            flow: 0,
            uid: 3,
            airtime: SimTime(20480),
            queue_delay: SimTime(7),
            contention_delay: SimTime(0),
            d_avg: 0.1 + 0.2,
            stamped: 1.0 / 3.0,
        });
        log.push(Record::Feedback {
            tick: SimTime(11),
            node: 1,
            flow: 0,
            trigger: FeedbackTrigger::DrfChange,
            rate: 488.28125,
            previous: None,
            uid: 9,
        });
        log.push(Record::Feedback {
            tick: SimTime(12),
            node: 1,
            flow: 0,
            trigger: FeedbackTrigger::Epoch,
            rate: 1e-300,
            previous: Some(f64::MIN_POSITIVE),
            uid: 10,
        });
        log.push(Record::RouteFound {
            tick: SimTime(1),
            node: 0,
            flow: 0,
            hops: vec![0, 4, 2],
            generation: 2,
        });
        log.push(Record::LinkBreak {
            tick: SimTime(5),
            flow: 0,
            upstream: 4,
            downstream: 2,
            class: TrafficClass::Probe,
            generation: 2,
        });
        log.push(Record::Drop {
            tick: SimTime(5),
            node: 4,
            class: TrafficClass::Probe,
            flow: 0,
            uid: 1,
            reason: DropReason::LinkBreak,
        });
        log
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let log = sample();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("tick,event_kind,node_id,detail\n"));
        let back = RunLog::read_csv(&buf[..]).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn unknown_kind_is_an_error() {
        let text = "tick,event_kind,node_id,detail\n1,warp,0,x=1\n";
        assert!(RunLog::read_csv(text.as_bytes()).is_err());
    }
}
