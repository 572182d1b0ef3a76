//! Post-processing of run logs into the reported quantities.
//!
//! Everything here is a pure function of a [`RunLog`] plus configuration, so
//! a persisted trace reproduces the same summary row.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channel::{RadioParams, TrafficClass};
use crate::config::{Protocol, ScenarioConfig};
use crate::sim::SimTime;
use crate::trace::{Record, RunLog};
use crate::transport::{FeedbackTrigger, SeqRanges};
use crate::FlowId;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlowStats {
    /// DATA copies emitted, retransmissions included.
    pub sent: u64,
    pub retransmitted: u64,
    /// Distinct sequence numbers received.
    pub delivered: u64,
    pub duplicates: u64,
    pub dropped: u64,
    pub in_flight: u64,
    pub acks_sent: u64,
}

impl FlowStats {
    /// Every emitted copy is accounted for exactly once.
    pub fn is_conserved(&self) -> bool {
        self.sent == self.delivered + self.duplicates + self.dropped + self.in_flight
    }
}

/// Per-flow counters, indexed by flow id.
pub fn flow_stats(log: &RunLog) -> Vec<FlowStats> {
    let mut stats: BTreeMap<FlowId, FlowStats> = BTreeMap::new();
    for r in log.iter() {
        match *r {
            Record::Send {
                flow, retransmission, ..
            } => {
                let s = stats.entry(flow).or_default();
                s.sent += 1;
                s.retransmitted += u64::from(retransmission);
            }
            Record::Deliver { flow, duplicate, .. } => {
                let s = stats.entry(flow).or_default();
                if duplicate {
                    s.duplicates += 1;
                } else {
                    s.delivered += 1;
                }
            }
            Record::Drop {
                flow,
                class: TrafficClass::Data,
                ..
            } => stats.entry(flow).or_default().dropped += 1,
            Record::Feedback { flow, .. } => stats.entry(flow).or_default().acks_sent += 1,
            Record::FlowEnd { flow, in_flight, .. } => stats.entry(flow).or_default().in_flight = in_flight,
            _ => {}
        }
    }
    let n = stats.keys().next_back().map_or(0, |&f| f + 1);
    (0..n).map(|f| stats.get(&f).copied().unwrap_or_default()).collect()
}

/// Unique packets delivered per second.
pub fn throughput(delivered: u64, duration_s: f64) -> f64 {
    assert!(duration_s > 0.0, "duration must be positive");
    delivered as f64 / duration_s
}

/// The printed ratio `n·p·8/es` and its reciprocal, in that order.
pub fn energy_per_bit(n: u64, p: u32, es: f64) -> (f64, f64) {
    assert!(n > 0 && p > 0 && es > 0.0, "energy_per_bit needs positive inputs");
    let bits = n as f64 * f64::from(p) * 8.0;
    (bits / es, es / bits)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateChangeStats {
    pub count: u64,
    /// Time-weighted mean, packets per second.
    pub mean: f64,
    pub max_deviation: f64,
}

/// Counts consecutive samples whose relative change reaches `epsilon`. Each
/// sample holds until the next one; the last holds until `end`.
pub fn rate_change_events(samples: &[(SimTime, f64)], end: SimTime, epsilon: f64) -> RateChangeStats {
    assert!(!samples.is_empty(), "rate trace is empty");
    let count = samples
        .windows(2)
        .filter(|w| (w[1].1 - w[0].1).abs() >= epsilon * w[0].1.abs())
        .count() as u64;
    let start = samples[0].0;
    let span = end.saturating_sub(start).ticks();
    let mean = if span == 0 {
        samples.iter().map(|s| s.1).sum::<f64>() / samples.len() as f64
    } else {
        let mut acc = 0.0;
        for (i, &(t, r)) in samples.iter().enumerate() {
            let until = samples.get(i + 1).map_or(end, |s| s.0).min(end);
            acc += r * until.saturating_sub(t).ticks() as f64;
        }
        acc / span as f64
    };
    let max_deviation = samples.iter().map(|s| (s.1 - mean).abs()).fold(0.0, f64::max);
    RateChangeStats {
        count,
        mean,
        max_deviation,
    }
}

/// The receiver's collated rate for `flow`, sampled every `interval` from
/// its first delivery until `end`.
pub fn collated_rate_trace(log: &RunLog, flow: FlowId, interval: SimTime, end: SimTime) -> Vec<(SimTime, f64)> {
    assert!(interval > SimTime::ZERO);
    let mut out = Vec::new();
    let mut next = interval;
    let mut current: Option<f64> = None;
    for r in log.iter() {
        if let Record::Deliver {
            tick,
            flow: f,
            duplicate: false,
            rate,
            ..
        } = *r
        {
            if f != flow {
                continue;
            }
            while next < tick && next <= end {
                if let Some(c) = current {
                    out.push((next, c));
                }
                next = next + interval;
            }
            current = Some(rate);
        }
    }
    while next <= end {
        if let Some(c) = current {
            out.push((next, c));
        }
        next = next + interval;
    }
    out
}

/// Radio energy per traffic class, from the logged airtimes.
pub fn class_energy(log: &RunLog, radio: &RadioParams) -> [f64; TrafficClass::ALL.len()] {
    let mut tx = [0u64; TrafficClass::ALL.len()];
    let mut rx = [0u64; TrafficClass::ALL.len()];
    for r in log.iter() {
        match *r {
            Record::Tx { class, airtime, .. } => tx[class.index()] += airtime.ticks(),
            Record::Rx { class, airtime, .. } => rx[class.index()] += airtime.ticks(),
            _ => {}
        }
    }
    let mut out = [0.0; TrafficClass::ALL.len()];
    for c in TrafficClass::ALL {
        let i = c.index();
        out[i] = radio.tx_power * SimTime(tx[i]).as_secs_f64() + radio.rx_power * SimTime(rx[i]).as_secs_f64();
    }
    out
}

/// Joules spent sending and receiving ACK_RATE frames.
pub fn ack_energy_share(log: &RunLog, radio: &RadioParams) -> f64 {
    class_energy(log, radio)[TrafficClass::AckRate.index()]
}

pub fn total_energy(log: &RunLog, radio: &RadioParams) -> f64 {
    class_energy(log, radio).iter().sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuiescenceViolation {
    pub tick: SimTime,
    pub flow: FlowId,
    pub message: String,
}

fn drf_expected(r_last: Option<f64>, r: f64, threshold: f64, loss: bool) -> Option<FeedbackTrigger> {
    match r_last {
        None => Some(FeedbackTrigger::First),
        Some(l) if (r - l).abs() >= threshold * l => Some(FeedbackTrigger::DrfChange),
        Some(_) if loss => Some(FeedbackTrigger::DrfLoss),
        Some(_) => None,
    }
}

/// Replays a DRF run: every new DATA arrival must emit feedback exactly when
/// the trigger holds, with the trigger and rate it implies.
pub fn drf_quiescence_violations(log: &RunLog, threshold: f64) -> Vec<QuiescenceViolation> {
    let mut r_last: BTreeMap<FlowId, f64> = BTreeMap::new();
    let mut seen: BTreeMap<FlowId, SeqRanges> = BTreeMap::new();
    let mut out = Vec::new();
    let records = &log.records;
    for (i, rec) in records.iter().enumerate() {
        match *rec {
            Record::Deliver {
                tick,
                flow,
                seq,
                duplicate: false,
                rate,
                ..
            } => {
                let ranges = seen.entry(flow).or_default();
                let expected_next = ranges.highest().map_or(0, |h| h + 1);
                ranges.insert(seq);
                let loss = seq > expected_next;
                let prev = r_last.get(&flow).copied();
                let want = drf_expected(prev, rate, threshold, loss);
                let emitted = match records.get(i + 1) {
                    Some(Record::Feedback {
                        tick: t,
                        flow: f,
                        trigger,
                        rate: fr,
                        previous,
                        ..
                    }) if *t == tick && *f == flow => Some((*trigger, *fr, *previous)),
                    _ => None,
                };
                let problem = match (want, emitted) {
                    (None, None) => None,
                    (Some(w), None) => Some(format!("{} feedback due but not sent (R={rate})", w.as_str())),
                    (None, Some((t, ..))) => Some(format!(
                        "{} feedback sent while R={rate} stayed within the threshold of {prev:?}",
                        t.as_str()
                    )),
                    (Some(w), Some((t, fr, p))) => {
                        if w != t {
                            Some(format!("trigger {} logged, {} expected", t.as_str(), w.as_str()))
                        } else if fr != rate {
                            Some(format!("feedback carried {fr}, collated rate was {rate}"))
                        } else if p != prev {
                            Some(format!("feedback names previous {p:?}, replay has {prev:?}"))
                        } else {
                            None
                        }
                    }
                };
                if let Some(message) = problem {
                    out.push(QuiescenceViolation { tick, flow, message });
                }
            }
            Record::Feedback { flow, rate, .. } => {
                r_last.insert(flow, rate);
            }
            _ => {}
        }
    }
    out
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario_id: String,
    pub protocol: String,
    /// Empty for epoch-timer runs.
    pub threshold_pct: Option<f64>,
    pub speed_mps: f64,
    pub flows: usize,
    pub seed: u64,
    pub duration_s: f64,
    /// Mean over flows of unique deliveries per second.
    pub throughput_pps: f64,
    pub acks_sent: u64,
    pub rate_changes: u64,
    pub mean_rate_pps: f64,
    pub total_energy_j: f64,
    pub ack_energy_j: f64,
    pub e_joules_per_bit: f64,
    pub e_paper_bits_per_joule: f64,
    pub scenario_hash: String,
    pub mobility_hash: String,
}

/// Builds the summary row for a run from its log.
pub fn summarize(cfg: &ScenarioConfig, log: &RunLog, mobility_hash: &str) -> SummaryRow {
    let duration = cfg.duration();
    let duration_s = cfg.scenario.duration;
    let stats = flow_stats(log);
    let flows = cfg.scenario.flows;
    let mean_over_flows = |f: &dyn Fn(usize) -> f64| (0..flows).map(f).sum::<f64>() / flows as f64;
    let throughput_pps = mean_over_flows(&|i| throughput(stats.get(i).map_or(0, |s| s.delivered), duration_s));
    let acks_sent = stats.iter().map(|s| s.acks_sent).sum();
    let interval = SimTime::from_secs_f64(cfg.metrics.sample_interval);
    let dynamics: Vec<Option<RateChangeStats>> = (0..flows)
        .map(|f| {
            let trace = collated_rate_trace(log, f, interval, duration);
            (!trace.is_empty()).then(|| rate_change_events(&trace, duration, cfg.metrics.rate_change_epsilon))
        })
        .collect();
    let rate_changes = dynamics.iter().flatten().map(|d| d.count).sum();
    let mean_rate_pps = mean_over_flows(&|i| dynamics[i].map_or(0.0, |d| d.mean));
    let energy = class_energy(log, &cfg.radio);
    let total_energy_j: f64 = energy.iter().sum();
    let ack_energy_j = energy[TrafficClass::AckRate.index()];
    let sent: u64 = stats.iter().map(|s| s.sent).sum();
    let (e_paper, e_jpb) = if sent > 0 && total_energy_j > 0.0 {
        energy_per_bit(sent, cfg.transport.data_size, total_energy_j)
    } else {
        (0.0, 0.0)
    };
    SummaryRow {
        scenario_id: cfg.scenario_id(),
        protocol: cfg.scenario.protocol.as_str().to_string(),
        threshold_pct: match cfg.scenario.protocol {
            Protocol::Drf => Some(cfg.scenario.drf_threshold * 100.0),
            Protocol::Atp => None,
        },
        speed_mps: cfg.scenario.speed,
        flows,
        seed: cfg.scenario.seed,
        duration_s,
        throughput_pps,
        acks_sent,
        rate_changes,
        mean_rate_pps,
        total_energy_j,
        ack_energy_j,
        e_joules_per_bit: e_jpb,
        e_paper_bits_per_joule: e_paper,
        scenario_hash: cfg.scenario_hash(),
        mobility_hash: mobility_hash.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn throughput_examples() {
        assert_eq!(throughput(62_900, 100.0), 629.0);
        assert_eq!(throughput(0, 100.0), 0.0);
        assert_eq!(throughput(1000, 50.0), 20.0);
    }

    #[test]
    fn energy_per_bit_examples() {
        let (paper, jpb) = energy_per_bit(1000, 512, 2.0);
        assert!(close(paper, 2_048_000.0));
        assert!(close(jpb, 2.0 / 4_096_000.0));
        assert!((jpb - 4.8828e-7).abs() < 1e-11);

        let (paper, jpb) = energy_per_bit(1000, 512, 4_096_000.0);
        assert_eq!((paper, jpb), (1.0, 1.0));

        let (p1, j1) = energy_per_bit(10, 512, 3.0);
        let (p2, j2) = energy_per_bit(10, 512, 6.0);
        assert!(close(p2, p1 / 2.0));
        assert!(close(j2, j1 * 2.0));
    }

    #[test]
    fn rate_change_examples() {
        let end = SimTime::from_secs(100);
        let flat: Vec<_> = (0..100).map(|i| (SimTime::from_secs(i), 42.0)).collect();
        let s = rate_change_events(&flat, end, 0.05);
        assert_eq!(s.count, 0);
        assert_eq!(s.mean, 42.0);
        assert_eq!(s.max_deviation, 0.0);

        let step = [(SimTime::ZERO, 100.0), (SimTime::from_secs(50), 200.0)];
        let s = rate_change_events(&step, end, 0.05);
        assert_eq!(s.count, 1);
        assert_eq!(s.mean, 150.0);
        assert_eq!(s.max_deviation, 50.0);

        let a = [(SimTime::ZERO, 10.0), (SimTime(5), 10.4), (SimTime(9), 13.0), (SimTime(12), 12.9)];
        let b: Vec<_> = a.iter().map(|&(t, r)| (t, r * 7.5)).collect();
        assert_eq!(
            rate_change_events(&a, SimTime(20), 0.05).count,
            rate_change_events(&b, SimTime(20), 0.05).count
        );
    }

    fn ack_hop(tick: u64, node: usize) -> [Record; 2] {
        let air = RadioParams::default().tx_duration(40);
        [
            Record::Tx {
                tick: SimTime(tick),
                node,
                to: node + 1,
                class: TrafficClass::AckRate,
                flow: 0,
                uid: tick,
                airtime: air,
                queue_delay: SimTime::ZERO,
                contention_delay: SimTime::ZERO,
                d_avg: 0.0,
                stamped: 0.0,
            },
            Record::Rx {
                tick: SimTime(tick),
                node: node + 1,
                class: TrafficClass::AckRate,
                flow: 0,
                uid: tick,
                airtime: air,
            },
        ]
    }

    #[test]
    fn ack_energy_examples() {
        let radio = RadioParams::default();
        assert_eq!(ack_energy_share(&RunLog::default(), &radio), 0.0);

        let one = RunLog {
            records: ack_hop(1, 0).to_vec(),
        };
        let e1 = ack_energy_share(&one, &radio);
        assert!((e1 - 0.1688e-3).abs() < 1e-7);
        assert!(close(e1, 0.660 * 160e-6 + 0.395 * 160e-6));

        let mut two = one.clone();
        two.records.extend(ack_hop(2, 1));
        assert!(close(ack_energy_share(&two, &radio), 2.0 * e1));
    }

    #[test]
    fn rate_trace_samples_last_value() {
        let mut log = RunLog::default();
        for (t, r) in [(5u64, 10.0), (15, 20.0), (16, 30.0)] {
            log.push(Record::Deliver {
                tick: SimTime(t),
                flow: 0,
                node: 1,
                seq: t,
                uid: t,
                duplicate: false,
                delay: 0.1,
                rate: r,
            });
        }
        let trace = collated_rate_trace(&log, 0, SimTime(10), SimTime(40));
        assert_eq!(
            trace,
            vec![(SimTime(10), 10.0), (SimTime(20), 30.0), (SimTime(30), 30.0), (SimTime(40), 30.0)]
        );
    }

    #[test]
    fn quiescence_replay_flags_spurious_and_missing_feedback() {
        let deliver = |t: u64, seq: u64, rate: f64| Record::Deliver {
            tick: SimTime(t),
            flow: 0,
            node: 1,
            seq,
            uid: t,
            duplicate: false,
            delay: 1.0 / rate,
            rate,
        };
        let fb = |t: u64, trigger, rate: f64, previous| Record::Feedback {
            tick: SimTime(t),
            flow: 0,
            node: 1,
            trigger,
            rate,
            previous,
            uid: t,
        };
        let good = RunLog {
            records: vec![
                deliver(1, 0, 100.0),
                fb(1, FeedbackTrigger::First, 100.0, None),
                deliver(2, 1, 110.0),
                deliver(3, 2, 125.0),
                fb(3, FeedbackTrigger::DrfChange, 125.0, Some(100.0)),
                deliver(4, 4, 126.0),
                fb(4, FeedbackTrigger::DrfLoss, 126.0, Some(125.0)),
            ],
        };
        assert!(drf_quiescence_violations(&good, 0.25).is_empty());

        let spurious = RunLog {
            records: vec![
                deliver(1, 0, 100.0),
                fb(1, FeedbackTrigger::First, 100.0, None),
                deliver(2, 1, 110.0),
                fb(2, FeedbackTrigger::DrfChange, 110.0, Some(100.0)),
            ],
        };
        assert_eq!(drf_quiescence_violations(&spurious, 0.25).len(), 1);

        let missing = RunLog {
            records: vec![deliver(1, 0, 100.0), fb(1, FeedbackTrigger::First, 100.0, None), deliver(2, 1, 60.0)],
        };
        assert_eq!(drf_quiescence_violations(&missing, 0.25).len(), 1);
    }
}
