use std::fmt;
use std::ops::{Add, AddAssign, Sub};

/// Clock resolution: one tick is 100 ns.
pub const TICKS_PER_SECOND: u64 = 10_000_000;

/// Simulation time as an integer count of 100 ns ticks since start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const TICK: SimTime = SimTime(1);

    pub const fn from_ticks(ticks: u64) -> Self {
        SimTime(ticks)
    }

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us * 10)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 10_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * TICKS_PER_SECOND)
    }

    /// Converts seconds to ticks, rounding to the nearest tick.
    pub fn from_secs_f64(s: f64) -> Self {
        debug_assert!(s >= 0.0 && s.is_finite(), "negative or non-finite duration {s}");
        SimTime((s * TICKS_PER_SECOND as f64).round() as u64)
    }

    /// Converts seconds to ticks, failing unless `s` is a whole number of ticks.
    pub fn exact_from_secs_f64(s: f64) -> Option<Self> {
        if !(s.is_finite() && s >= 0.0) {
            return None;
        }
        let ticks = s * TICKS_PER_SECOND as f64;
        let rounded = ticks.round();
        if (ticks - rounded).abs() <= (rounded * 1e-12).max(1e-6) {
            Some(SimTime(rounded as u64))
        } else {
            None
        }
    }

    pub const fn ticks(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / TICKS_PER_SECOND as f64
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(
            self.0
                .checked_sub(rhs.0)
                .expect("SimTime subtraction underflow"),
        )
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.7}s", self.as_secs_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_delay_is_exact() {
        assert_eq!(SimTime::exact_from_secs_f64(2.5e-6), Some(SimTime(25)));
        assert_eq!(SimTime::from_micros(2) + SimTime(5), SimTime(25));
    }

    #[test]
    fn sub_tick_durations_are_rejected() {
        assert_eq!(SimTime::exact_from_secs_f64(2.55e-7), None);
        assert_eq!(SimTime::exact_from_secs_f64(-1.0), None);
        assert_eq!(SimTime::exact_from_secs_f64(100.0), Some(SimTime::from_secs(100)));
    }
}
