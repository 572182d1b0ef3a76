use std::collections::{BTreeMap, HashSet, VecDeque};

use crate::sim::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Probe,
    Connected,
}

/// How a silent feedback channel is detected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Liveness {
    /// Paired with epoch feedback: halve after two silent periods, re-probe
    /// after the third.
    FeedbackPeriods { period: SimTime },
    /// Paired with dynamic feedback: re-probe after a fixed silence.
    Watchdog { timeout: SimTime },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SenderParams {
    /// Increase gate: feedback must exceed the current rate by this fraction.
    pub increase_threshold_x: f64,
    /// Only `1/k` of the gap to the feedback rate is taken per increase.
    pub increase_divisor_k: f64,
    /// Packets per second.
    pub rate_cap: f64,
    pub liveness: Liveness,
    /// A gap-indicated packet whose last copy is this old is resent even
    /// when the receiver has seen nothing newer.
    pub retransmit_timeout: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SentRecord {
    pub first_sent: SimTime,
    pub last_sent: SimTime,
    pub transmissions: u32,
}

/// The next DATA copy to put on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emission {
    pub seq: u64,
    pub retransmission: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LivenessAction {
    None,
    Decreased { rate: f64 },
    Reprobe,
}

/// Feedback carried by an ACK+Rate, as seen by the sender.
#[derive(Debug, Clone, PartialEq)]
pub struct AckInfo<'a> {
    pub rate: f64,
    pub sack_blocks: &'a [(u64, u64)],
    /// Send time of the newest DATA copy the receiver had seen.
    pub echo_sent_at: SimTime,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AckOutcome {
    /// Sequence numbers removed from the retransmission buffer.
    pub released: Vec<u64>,
    /// Sequence numbers newly queued for retransmission.
    pub requeued: Vec<u64>,
}

/// Closed-form rate rule: gated fractional increase, immediate decrease,
/// clamped to `(0, cap]`.
pub fn next_rate(s: f64, r: f64, x: f64, k: f64, cap: f64) -> f64 {
    let next = if r > s * (1.0 + x) {
        s + (r - s) / k
    } else if r < s {
        r
    } else {
        s
    };
    next.min(cap)
}

/// Rate-clocked transport sender for one flow with a saturated source.
#[derive(Debug, Clone)]
pub struct SenderState {
    params: SenderParams,
    phase: Phase,
    rate_s: f64,
    next_seq: u64,
    unacked: BTreeMap<u64, SentRecord>,
    retransmit: VecDeque<u64>,
    queued: HashSet<u64>,
    missed_feedback_periods: u32,
    last_feedback_at: SimTime,
    sent: u64,
    retransmitted: u64,
    app_open: bool,
}

impl SenderState {
    pub fn new(params: SenderParams) -> Self {
        SenderState {
            params,
            phase: Phase::Probe,
            rate_s: 0.0,
            next_seq: 0,
            unacked: BTreeMap::new(),
            retransmit: VecDeque::new(),
            queued: HashSet::new(),
            missed_feedback_periods: 0,
            last_feedback_at: SimTime::ZERO,
            sent: 0,
            retransmitted: 0,
            app_open: true,
        }
    }

    pub fn params(&self) -> &SenderParams {
        &self.params
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn rate(&self) -> f64 {
        self.rate_s
    }

    pub fn unacked(&self) -> &BTreeMap<u64, SentRecord> {
        &self.unacked
    }

    pub fn retransmit_queue_len(&self) -> usize {
        self.retransmit.len()
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn last_feedback_at(&self) -> SimTime {
        self.last_feedback_at
    }

    pub fn missed_feedback_periods(&self) -> u32 {
        self.missed_feedback_periods
    }

    /// DATA copies emitted, including retransmissions.
    pub fn sent(&self) -> u64 {
        self.sent
    }

    pub fn retransmitted(&self) -> u64 {
        self.retransmitted
    }

    /// Stops new data; retransmissions continue.
    pub fn close_application(&mut self) {
        self.app_open = false;
    }

    pub fn has_pending(&self) -> bool {
        self.app_open || !self.retransmit.is_empty()
    }

    /// Applies feedback rate `r`.
    pub fn update_sender_rate(&mut self, r: f64) {
        debug_assert!(r > 0.0, "feedback rate must be positive");
        let p = self.params;
        self.rate_s = next_rate(self.rate_s, r, p.increase_threshold_x, p.increase_divisor_k, p.rate_cap);
        self.missed_feedback_periods = 0;
    }

    /// Probe answered: adopt the reported rate and start sending.
    pub fn on_probe_reply(&mut self, rate: f64, now: SimTime) {
        self.rate_s = rate.min(self.params.rate_cap);
        self.phase = Phase::Connected;
        self.missed_feedback_periods = 0;
        self.last_feedback_at = now;
    }

    pub fn enter_probe(&mut self) {
        self.phase = Phase::Probe;
        self.missed_feedback_periods = 0;
    }

    /// Processes an ACK+Rate: releases SACK-covered packets, queues
    /// gap-indicated ones ahead of new data and, when connected, updates the
    /// rate.
    pub fn on_ack(&mut self, ack: &AckInfo<'_>, now: SimTime) -> AckOutcome {
        let mut out = AckOutcome::default();
        for &(first, last) in ack.sack_blocks {
            let covered: Vec<u64> = self.unacked.range(first..=last).map(|(&s, _)| s).collect();
            for s in covered {
                self.unacked.remove(&s);
                out.released.push(s);
            }
        }
        // Below the highest reported block a missing packet is a known hole,
        // resent once the receiver has seen a newer copy of anything. Any
        // packet, including the tail beyond the SACK, is resent once its last
        // copy is older than the retransmission timeout.
        let highest = ack.sack_blocks.iter().map(|&(_, e)| e).max();
        for (&seq, rec) in &self.unacked {
            let hole = highest.is_some_and(|h| seq < h) && rec.last_sent < ack.echo_sent_at;
            let expired = now.saturating_sub(rec.last_sent) >= self.params.retransmit_timeout;
            if (hole || expired) && !self.queued.contains(&seq) {
                out.requeued.push(seq);
            }
        }
        for &seq in &out.requeued {
            self.queued.insert(seq);
            self.retransmit.push_back(seq);
        }
        if self.phase == Phase::Connected {
            self.update_sender_rate(ack.rate);
            self.last_feedback_at = now;
        }
        out
    }

    /// Picks the next DATA copy (retransmissions first) and records it as
    /// sent at `now`. `None` when there is nothing to send or the sender is
    /// probing.
    pub fn emit(&mut self, now: SimTime) -> Option<Emission> {
        if self.phase != Phase::Connected {
            return None;
        }
        while let Some(seq) = self.retransmit.pop_front() {
            self.queued.remove(&seq);
            if let Some(rec) = self.unacked.get_mut(&seq) {
                rec.last_sent = now;
                rec.transmissions += 1;
                self.sent += 1;
                self.retransmitted += 1;
                return Some(Emission {
                    seq,
                    retransmission: true,
                });
            }
        }
        if !self.app_open {
            return None;
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.unacked.insert(
            seq,
            SentRecord {
                first_sent: now,
                last_sent: now,
                transmissions: 1,
            },
        );
        self.sent += 1;
        Some(Emission {
            seq,
            retransmission: false,
        })
    }

    /// Gap between rate-clocked sends at the current rate.
    pub fn send_interval(&self) -> SimTime {
        debug_assert!(self.rate_s > 0.0);
        SimTime::from_secs_f64(1.0 / self.rate_s).max(SimTime::TICK)
    }

    /// Reacts to missing feedback.
    pub fn liveness_check(&mut self, now: SimTime) -> LivenessAction {
        if self.phase != Phase::Connected {
            return LivenessAction::None;
        }
        let silent = now.saturating_sub(self.last_feedback_at);
        match self.params.liveness {
            Liveness::FeedbackPeriods { period } => {
                let periods = (silent.ticks() / period.ticks().max(1)) as u32;
                if periods >= 3 {
                    self.enter_probe();
                    LivenessAction::Reprobe
                } else if periods >= 2 && self.missed_feedback_periods < 2 {
                    self.missed_feedback_periods = periods;
                    self.rate_s = (self.rate_s / 2.0).max(f64::MIN_POSITIVE);
                    LivenessAction::Decreased { rate: self.rate_s }
                } else {
                    self.missed_feedback_periods = self.missed_feedback_periods.max(periods);
                    LivenessAction::None
                }
            }
            Liveness::Watchdog { timeout } => {
                if silent >= timeout {
                    self.enter_probe();
                    LivenessAction::Reprobe
                } else {
                    LivenessAction::None
                }
            }
        }
    }
}
