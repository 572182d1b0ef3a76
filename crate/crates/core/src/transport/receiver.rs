use std::fmt;

use crate::sim::SimTime;

use super::ranges::{build_sack, SeqRanges};

/// When the receiver sends ACK+Rate feedback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeedbackMode {
    /// Baseline: one ACK per fixed period.
    EpochTimer { period: SimTime },
    /// Dynamic rate feedback: ACK when the collated rate moves by at least
    /// `threshold` (a fraction) away from the last reported rate.
    Drf { threshold: f64 },
}

/// Why an ACK+Rate left the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeedbackTrigger {
    Epoch,
    DrfChange,
    DrfLoss,
    /// Extra loss-driven ACK in epoch mode, rate-limited by the SACK cadence.
    EpochLoss,
    /// First feedback of a connection (probe reply or first data ACK).
    First,
}

impl FeedbackTrigger {
    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackTrigger::Epoch => "epoch",
            FeedbackTrigger::DrfChange => "drf_change",
            FeedbackTrigger::DrfLoss => "drf_loss",
            FeedbackTrigger::EpochLoss => "epoch_loss",
            FeedbackTrigger::First => "first",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            FeedbackTrigger::Epoch,
            FeedbackTrigger::DrfChange,
            FeedbackTrigger::DrfLoss,
            FeedbackTrigger::EpochLoss,
            FeedbackTrigger::First,
        ]
        .into_iter()
        .find(|t| t.as_str() == s)
    }

    pub fn is_loss(self) -> bool {
        matches!(self, FeedbackTrigger::DrfLoss | FeedbackTrigger::EpochLoss)
    }
}

impl fmt::Display for FeedbackTrigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arrival {
    /// New sequence number; `loss` if it opened a gap below it.
    New { loss: bool },
    Duplicate,
}

/// Result of handling one DATA arrival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataOutcome {
    pub arrival: Arrival,
    /// Collated rate after folding in this packet's delay.
    pub rate: f64,
    pub feedback: Option<FeedbackTrigger>,
}

/// Transport receiver for one flow.
#[derive(Debug, Clone)]
pub struct ReceiverState {
    mode: FeedbackMode,
    alpha_r: f64,
    rate_cap: f64,
    min_delay: f64,
    sack_every: u32,
    max_sack_blocks: usize,
    r_last: Option<f64>,
    d_collated: Option<f64>,
    received: SeqRanges,
    data_since_ack: u32,
    last_ack_at: Option<SimTime>,
    latest_sent_at: SimTime,
    clamped_samples: u64,
}

impl ReceiverState {
    pub fn new(mode: FeedbackMode, alpha_r: f64, rate_cap: f64, sack_every: u32) -> Self {
        ReceiverState {
            mode,
            alpha_r,
            rate_cap,
            min_delay: SimTime::TICK.as_secs_f64(),
            sack_every,
            max_sack_blocks: 8,
            r_last: None,
            d_collated: None,
            received: SeqRanges::new(),
            data_since_ack: 0,
            last_ack_at: None,
            latest_sent_at: SimTime::ZERO,
            clamped_samples: 0,
        }
    }

    pub fn mode(&self) -> FeedbackMode {
        self.mode
    }

    pub fn r_last(&self) -> Option<f64> {
        self.r_last
    }

    pub fn d_collated(&self) -> Option<f64> {
        self.d_collated
    }

    pub fn received(&self) -> &SeqRanges {
        &self.received
    }

    pub fn last_ack_at(&self) -> Option<SimTime> {
        self.last_ack_at
    }

    pub fn latest_sent_at(&self) -> SimTime {
        self.latest_sent_at
    }

    /// Samples whose stamped delay was zero and had to be clamped.
    pub fn clamped_samples(&self) -> u64 {
        self.clamped_samples
    }

    /// Reported rate for a smoothed delay: its inverse, capped at channel
    /// capacity.
    pub fn rate_for_delay(&self, delay: f64) -> f64 {
        (1.0 / delay.max(self.min_delay)).min(self.rate_cap)
    }

    /// Folds a packet's stamped delay into the smoothed delay and returns
    /// the collated rate. A zero delay is clamped to one clock tick.
    pub fn collate_rate(&mut self, pkt_delay: f64) -> f64 {
        let sample = if pkt_delay <= 0.0 {
            self.clamped_samples += 1;
            if self.clamped_samples == 1 {
                log::warn!("zero congestion delay at receiver, clamping to one tick");
            }
            self.min_delay
        } else {
            pkt_delay
        };
        let d = match self.d_collated {
            None => sample,
            Some(prev) => self.alpha_r * prev + (1.0 - self.alpha_r) * sample,
        };
        self.d_collated = Some(d);
        self.rate_for_delay(d)
    }

    /// Records `seq`; reports whether it is new and whether it exposed a gap.
    pub fn detect_loss(&mut self, seq: u64) -> Arrival {
        let expected = self.received.highest().map_or(0, |h| h + 1);
        if !self.received.insert(seq) {
            return Arrival::Duplicate;
        }
        Arrival::New {
            loss: seq > expected,
        }
    }

    pub fn epoch_feedback_due(&self, now: SimTime) -> bool {
        let FeedbackMode::EpochTimer { period } = self.mode else {
            return false;
        };
        if self.received.is_empty() {
            return false;
        }
        match self.last_ack_at {
            None => true,
            Some(t) => now.saturating_sub(t) >= period,
        }
    }

    /// DRF trigger test. Does not change state.
    pub fn drf_feedback_due(&self, r_new: f64, loss_detected: bool) -> Option<FeedbackTrigger> {
        let FeedbackMode::Drf { threshold } = self.mode else {
            return None;
        };
        match self.r_last {
            None => Some(FeedbackTrigger::First),
            Some(r_last) if (r_new - r_last).abs() >= threshold * r_last => Some(FeedbackTrigger::DrfChange),
            Some(_) if loss_detected => Some(FeedbackTrigger::DrfLoss),
            Some(_) => None,
        }
    }

    pub fn build_sack(&self) -> Vec<(u64, u64)> {
        build_sack(&self.received, self.max_sack_blocks)
    }

    /// Notes that an ACK+Rate reporting `rate` was emitted at `now`.
    pub fn record_feedback(&mut self, rate: f64, now: SimTime) {
        self.r_last = Some(rate);
        self.last_ack_at = Some(now);
        self.data_since_ack = 0;
    }

    /// Handles a DATA arrival: loss check, rate collation and the feedback
    /// decision. The caller emits the ACK and then calls `record_feedback`.
    pub fn on_data(&mut self, seq: u64, congestion_delay: f64, sent_at: SimTime) -> DataOutcome {
        let arrival = self.detect_loss(seq);
        if arrival == Arrival::Duplicate {
            return DataOutcome {
                arrival,
                rate: self.current_rate(),
                feedback: None,
            };
        }
        self.latest_sent_at = self.latest_sent_at.max(sent_at);
        self.data_since_ack += 1;
        let rate = self.collate_rate(congestion_delay);
        let loss = matches!(arrival, Arrival::New { loss: true });
        let feedback = match self.mode {
            FeedbackMode::Drf { .. } => self.drf_feedback_due(rate, loss),
            FeedbackMode::EpochTimer { .. } => {
                if self.r_last.is_none() && self.last_ack_at.is_none() {
                    None
                } else if loss && self.data_since_ack >= self.sack_every {
                    Some(FeedbackTrigger::EpochLoss)
                } else {
                    None
                }
            }
        };
        DataOutcome {
            arrival,
            rate,
            feedback,
        }
    }

    /// Rate the receiver would report now.
    pub fn current_rate(&self) -> f64 {
        match self.d_collated {
            Some(d) => self.rate_for_delay(d),
            None => self.rate_cap,
        }
    }

    /// Probe reply rate: inverse of the probe's stamped delay, capped.
    pub fn probe_rate(&self, probe_delay: f64) -> f64 {
        self.rate_for_delay(probe_delay)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAP: f64 = 2_000_000.0 / (8.0 * 512.0);

    fn drf(threshold: f64) -> ReceiverState {
        ReceiverState::new(FeedbackMode::Drf { threshold }, 0.75, CAP, 20)
    }

    fn epoch(period: SimTime) -> ReceiverState {
        ReceiverState::new(FeedbackMode::EpochTimer { period }, 0.75, CAP, 20)
    }

    #[test]
    fn steady_delay_gives_inverse_rate() {
        let mut r = drf(0.25);
        for _ in 0..50 {
            r.collate_rate(0.005);
        }
        assert!((r.collate_rate(0.005) - 200.0).abs() < 1e-9);
    }

    #[test]
    fn first_packet_sets_rate() {
        let mut r = drf(0.25);
        assert!((r.collate_rate(0.010) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn constant_delay_converges() {
        let mut r = drf(0.25);
        r.collate_rate(0.002);
        let mut rate = 0.0;
        for _ in 0..200 {
            rate = r.collate_rate(0.008);
        }
        assert!((rate - 125.0).abs() < 1e-6);
    }

    #[test]
    fn zero_delay_is_clamped_then_capped() {
        let mut r = drf(0.25);
        assert_eq!(r.collate_rate(0.0), CAP);
        assert_eq!(r.clamped_samples(), 1);
    }

    #[test]
    fn drf_doubling_threshold() {
        let mut r = drf(1.0);
        r.record_feedback(4.0, SimTime::ZERO);
        assert_eq!(r.drf_feedback_due(7.9, false), None);
        assert_eq!(r.drf_feedback_due(8.0, false), Some(FeedbackTrigger::DrfChange));
    }

    #[test]
    fn drf_quarter_threshold_is_inclusive() {
        let mut r = drf(0.25);
        r.record_feedback(200.0, SimTime::ZERO);
        assert_eq!(r.drf_feedback_due(240.0, false), None);
        assert_eq!(r.drf_feedback_due(250.0, false), Some(FeedbackTrigger::DrfChange));
        assert_eq!(r.drf_feedback_due(150.0, false), Some(FeedbackTrigger::DrfChange));
        assert_eq!(r.drf_feedback_due(240.0, true), Some(FeedbackTrigger::DrfLoss));
    }

    #[test]
    fn drf_first_feedback_always_fires() {
        let r = drf(0.25);
        assert_eq!(r.drf_feedback_due(100.0, false), Some(FeedbackTrigger::First));
    }

    #[test]
    fn gap_detection() {
        let mut r = drf(0.25);
        for s in 0..3 {
            assert_eq!(r.detect_loss(s), Arrival::New { loss: false });
        }
        let mut a = r.clone();
        assert_eq!(a.detect_loss(4), Arrival::New { loss: true });
        assert_eq!(a.detect_loss(3), Arrival::New { loss: false });
        assert_eq!(a.received().iter().collect::<Vec<_>>(), vec![(0, 4)]);
        let mut b = r.clone();
        assert_eq!(b.detect_loss(3), Arrival::New { loss: false });
        assert_eq!(b.detect_loss(3), Arrival::Duplicate);
    }

    #[test]
    fn first_arrival_beyond_zero_is_a_loss() {
        let mut r = drf(0.25);
        assert_eq!(r.detect_loss(2), Arrival::New { loss: true });
    }

    #[test]
    fn epoch_due_needs_data_and_elapsed_period() {
        let period = SimTime::from_secs(1);
        let mut r = epoch(period);
        assert!(!r.epoch_feedback_due(SimTime::from_secs(5)));
        r.on_data(0, 0.004, SimTime::ZERO);
        assert!(r.epoch_feedback_due(SimTime::from_millis(10)));
        r.record_feedback(100.0, SimTime::from_secs(1));
        assert!(!r.epoch_feedback_due(SimTime::from_millis(1_999)));
        assert!(r.epoch_feedback_due(SimTime::from_secs(2)));
    }

    #[test]
    fn epoch_mode_loss_ack_respects_sack_cadence() {
        let mut r = epoch(SimTime::from_secs(1));
        r.on_data(0, 0.004, SimTime::ZERO);
        r.record_feedback(100.0, SimTime::ZERO);
        for s in 1..10 {
            assert_eq!(r.on_data(s, 0.004, SimTime::ZERO).feedback, None);
        }
        // gap after only 10 packets: no extra ACK
        assert_eq!(r.on_data(12, 0.004, SimTime::ZERO).feedback, None);
        for s in 13..25 {
            r.on_data(s, 0.004, SimTime::ZERO);
        }
        assert_eq!(
            r.on_data(30, 0.004, SimTime::ZERO).feedback,
            Some(FeedbackTrigger::EpochLoss)
        );
    }

    #[test]
    fn duplicate_data_changes_nothing() {
        let mut r = drf(0.25);
        r.on_data(0, 0.004, SimTime(5));
        let d = r.d_collated();
        let out = r.on_data(0, 0.050, SimTime(9));
        assert_eq!(out.arrival, Arrival::Duplicate);
        assert_eq!(out.feedback, None);
        assert_eq!(r.d_collated(), d);
    }

    #[test]
    fn trigger_names_round_trip() {
        for t in [
            FeedbackTrigger::Epoch,
            FeedbackTrigger::DrfChange,
            FeedbackTrigger::DrfLoss,
            FeedbackTrigger::EpochLoss,
            FeedbackTrigger::First,
        ] {
            assert_eq!(FeedbackTrigger::parse(t.as_str()), Some(t));
        }
    }
}
