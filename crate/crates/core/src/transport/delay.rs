/// Exponentially weighted average of the queuing plus contention delay a node
/// imposes on the frames it forwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeDelayEstimator {
    d_avg: Option<f64>,
    alpha: f64,
}

impl NodeDelayEstimator {
    pub fn new(alpha: f64) -> Self {
        assert!((0.0..1.0).contains(&alpha), "alpha {alpha} outside [0, 1)");
        NodeDelayEstimator { d_avg: None, alpha }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Current average in seconds; zero before the first sample.
    pub fn d_avg(&self) -> f64 {
        self.d_avg.unwrap_or(0.0)
    }

    pub fn has_samples(&self) -> bool {
        self.d_avg.is_some()
    }

    /// Folds in one frame's queuing delay `q` and contention delay `c`
    /// (seconds). The first sample initialises the average.
    pub fn update(&mut self, q: f64, c: f64) -> f64 {
        debug_assert!(q >= 0.0 && c >= 0.0);
        let sample = q + c;
        let next = match self.d_avg {
            None => sample,
            Some(d) => self.alpha * d + (1.0 - self.alpha) * sample,
        };
        self.d_avg = Some(next);
        next
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn weighted_update() {
        let mut e = NodeDelayEstimator::new(0.75);
        e.update(0.004, 0.0);
        let d = e.update(0.005, 0.003);
        assert!((d - 0.005).abs() < 1e-15);
    }

    #[test]
    fn first_sample_initialises() {
        let mut e = NodeDelayEstimator::new(0.75);
        assert_eq!(e.d_avg(), 0.0);
        assert_eq!(e.update(0.002, 0.004), 0.006);
    }

    #[test]
    fn sample_equal_to_average_is_a_fixed_point() {
        let mut e = NodeDelayEstimator::new(0.75);
        e.update(0.003, 0.0);
        assert_eq!(e.update(0.001, 0.002), 0.003);
    }

    proptest! {
        #[test]
        fn update_stays_between_old_and_sample(
            alpha in 0.0f64..0.999,
            first in 0.0f64..1.0,
            q in 0.0f64..1.0,
            c in 0.0f64..1.0,
        ) {
            let mut e = NodeDelayEstimator::new(alpha);
            e.update(first, 0.0);
            let old = e.d_avg();
            let sample = q + c;
            let new = e.update(q, c);
            let (lo, hi) = if old < sample { (old, sample) } else { (sample, old) };
            prop_assert!(new >= lo - 1e-15 && new <= hi + 1e-15);
            prop_assert!(new >= 0.0);
        }
    }
}
