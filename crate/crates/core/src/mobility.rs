//! Random-waypoint motion with zero pause time.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::sim::{RngStream, SimTime};
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(self, other: Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub width: f64,
    pub height: f64,
}

impl Grid {
    pub fn contains(&self, p: Position) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn random_point(&self, rng: &mut RngStream) -> Position {
        Position::new(rng.uniform(0.0, self.width), rng.uniform(0.0, self.height))
    }
}

/// One straight-line leg of a waypoint trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaypointState {
    pub origin: Position,
    pub target: Position,
    pub depart_time: SimTime,
    /// meters per second
    pub speed: f64,
}

impl WaypointState {
    pub fn stationary(at: Position, since: SimTime) -> Self {
        WaypointState {
            origin: at,
            target: at,
            depart_time: since,
            speed: 0.0,
        }
    }

    pub fn length(&self) -> f64 {
        self.origin.distance(self.target)
    }

    /// First tick at which the node sits on `target`. `None` for a node that
    /// never moves.
    pub fn arrival_time(&self) -> Option<SimTime> {
        if self.speed <= 0.0 {
            return None;
        }
        let secs = self.length() / self.speed;
        let ticks = (secs * crate::sim::TICKS_PER_SECOND as f64).ceil() as u64;
        Some(self.depart_time + SimTime(ticks))
    }

    /// Linear interpolation from origin toward target, held at target once
    /// the leg is complete.
    pub fn position_at(&self, t: SimTime) -> Position {
        debug_assert!(t >= self.depart_time, "query before leg departure");
        let len = self.length();
        if self.speed <= 0.0 || len == 0.0 {
            return self.origin;
        }
        let travelled = self.speed * t.saturating_sub(self.depart_time).as_secs_f64();
        if travelled >= len {
            return self.target;
        }
        let f = travelled / len;
        Position::new(
            self.origin.x + (self.target.x - self.origin.x) * f,
            self.origin.y + (self.target.y - self.origin.y) * f,
        )
    }

    /// The following leg: departs from this leg's target at `depart` toward a
    /// fresh uniform target.
    pub fn next_leg(&self, grid: &Grid, depart: SimTime, rng: &mut RngStream) -> WaypointState {
        WaypointState {
            origin: self.target,
            target: grid.random_point(rng),
            depart_time: depart,
            speed: self.speed,
        }
    }
}

#[derive(Debug, Clone)]
struct NodeMotion {
    leg: WaypointState,
    arrival: Option<SimTime>,
    rng: RngStream,
    legs: u64,
    digest: Sha256,
}

impl NodeMotion {
    fn record(&mut self) {
        self.legs += 1;
        self.digest.update(self.leg.target.x.to_bits().to_le_bytes());
        self.digest.update(self.leg.target.y.to_bits().to_le_bytes());
        self.digest.update(self.leg.depart_time.ticks().to_le_bytes());
    }

    fn advance(&mut self, grid: &Grid, t: SimTime) {
        while let Some(arrival) = self.arrival {
            if t < arrival {
                break;
            }
            self.leg = self.leg.next_leg(grid, arrival, &mut self.rng);
            self.arrival = self.leg.arrival_time();
            self.record();
        }
    }
}

/// Trajectories for every node in a scenario.
///
/// Each node draws from its own stream, so trajectories do not depend on the
/// order in which positions are queried.
#[derive(Debug, Clone)]
pub struct Mobility {
    grid: Grid,
    nodes: Vec<NodeMotion>,
}

impl Mobility {
    /// Uniform initial placement followed by random-waypoint legs at `speed`.
    pub fn random_waypoint(grid: Grid, node_count: usize, speed: f64, seed: u64) -> Self {
        let nodes = (0..node_count)
            .map(|i| {
                let mut rng = RngStream::new(seed, format!("mobility/{i}"));
                let start = grid.random_point(&mut rng);
                let first = WaypointState {
                    origin: start,
                    target: start,
                    depart_time: SimTime::ZERO,
                    speed,
                };
                let leg = if speed > 0.0 {
                    first.next_leg(&grid, SimTime::ZERO, &mut rng)
                } else {
                    WaypointState::stationary(start, SimTime::ZERO)
                };
                let mut m = NodeMotion {
                    leg,
                    arrival: leg.arrival_time(),
                    rng,
                    legs: 0,
                    digest: Sha256::new(),
                };
                m.digest.update(start.x.to_bits().to_le_bytes());
                m.digest.update(start.y.to_bits().to_le_bytes());
                m.record();
                m
            })
            .collect();
        Mobility { grid, nodes }
    }

    /// Nodes pinned at the given positions.
    pub fn fixed(grid: Grid, positions: &[Position]) -> Self {
        let nodes = positions
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let mut m = NodeMotion {
                    leg: WaypointState::stationary(p, SimTime::ZERO),
                    arrival: None,
                    rng: RngStream::new(0, format!("mobility/{i}")),
                    legs: 0,
                    digest: Sha256::new(),
                };
                m.digest.update(p.x.to_bits().to_le_bytes());
                m.digest.update(p.y.to_bits().to_le_bytes());
                m.record();
                m
            })
            .collect();
        Mobility { grid, nodes }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Position of `node` at `t`. Queries for a node must be non-decreasing in
    /// time, which the event loop guarantees.
    pub fn position_at(&mut self, node: NodeId, t: SimTime) -> Position {
        let grid = self.grid;
        let m = &mut self.nodes[node];
        m.advance(&grid, t);
        m.leg.position_at(t)
    }

    pub fn current_leg(&self, node: NodeId) -> &WaypointState {
        &self.nodes[node].leg
    }

    /// Hex digest of every leg of every node up to `until`; identical digests
    /// mean identical trajectories.
    pub fn trajectory_hash(&mut self, until: SimTime) -> String {
        let grid = self.grid;
        let mut all = Sha256::new();
        for m in &mut self.nodes {
            m.advance(&grid, until);
            all.update(m.legs.to_le_bytes());
            all.update(m.digest.clone().finalize());
        }
        let digest = all.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRID: Grid = Grid {
        width: 500.0,
        height: 500.0,
    };

    #[test]
    fn halfway_along_leg() {
        let leg = WaypointState {
            origin: Position::new(0.0, 0.0),
            target: Position::new(300.0, 400.0),
            depart_time: SimTime::ZERO,
            speed: 5.0,
        };
        let p = leg.position_at(SimTime::from_secs(50));
        assert!((p.x - 150.0).abs() < 1e-9 && (p.y - 200.0).abs() < 1e-9, "{p:?}");
    }

    #[test]
    fn arrival_clamps_at_target() {
        let leg = WaypointState {
            origin: Position::new(0.0, 0.0),
            target: Position::new(300.0, 400.0),
            depart_time: SimTime::ZERO,
            speed: 5.0,
        };
        assert_eq!(leg.position_at(SimTime::from_secs(100)), leg.target);
        assert_eq!(leg.position_at(SimTime::from_secs(150)), leg.target);
        assert_eq!(leg.arrival_time(), Some(SimTime::from_secs(100)));
    }

    #[test]
    fn zero_speed_is_static() {
        let mut m = Mobility::random_waypoint(GRID, 3, 0.0, 9);
        let p0 = m.position_at(1, SimTime::ZERO);
        let p1 = m.position_at(1, SimTime::from_secs(1_000));
        assert_eq!(p0, p1);
    }

    #[test]
    fn same_seed_same_waypoints() {
        let mut a = Mobility::random_waypoint(GRID, 5, 20.0, 42);
        let mut b = Mobility::random_waypoint(GRID, 5, 20.0, 42);
        for s in 0..200 {
            let t = SimTime::from_millis(s * 500);
            for n in 0..5 {
                assert_eq!(a.position_at(n, t), b.position_at(n, t));
            }
        }
        let end = SimTime::from_secs(100);
        assert_eq!(a.trajectory_hash(end), b.trajectory_hash(end));
    }

    #[test]
    fn query_order_does_not_change_trajectories() {
        let end = SimTime::from_secs(60);
        let mut a = Mobility::random_waypoint(GRID, 4, 30.0, 3);
        let mut b = Mobility::random_waypoint(GRID, 4, 30.0, 3);
        // a: node 3 first far ahead; b: round-robin
        let pa = a.position_at(3, end);
        for s in 0..=60 {
            for n in 0..4 {
                b.position_at(n, SimTime::from_secs(s));
            }
        }
        assert_eq!(pa, b.position_at(3, end));
        assert_eq!(a.trajectory_hash(end), b.trajectory_hash(end));
    }

    #[test]
    fn target_draws_centre_on_grid() {
        let mut rng = RngStream::new(11, "targets");
        let n = 10_000;
        let (mut sx, mut sy) = (0.0, 0.0);
        let mut leg = WaypointState::stationary(Position::new(0.0, 0.0), SimTime::ZERO);
        for i in 0..n {
            leg = leg.next_leg(&GRID, SimTime(i), &mut rng);
            assert!(GRID.contains(leg.target));
            sx += leg.target.x;
            sy += leg.target.y;
        }
        let (mx, my) = (sx / n as f64, sy / n as f64);
        assert!((mx - 250.0).abs() < 10.0 && (my - 250.0).abs() < 10.0, "({mx}, {my})");
    }

    #[test]
    fn positions_stay_on_grid_and_respect_speed() {
        let speed = 50.0;
        let mut m = Mobility::random_waypoint(GRID, 10, speed, 5);
        let step = SimTime::from_millis(100);
        let mut prev: Vec<Position> = (0..10).map(|n| m.position_at(n, SimTime::ZERO)).collect();
        let mut t = SimTime::ZERO;
        for _ in 0..2_000 {
            t += step;
            for (n, p_prev) in prev.iter_mut().enumerate() {
                let p = m.position_at(n, t);
                assert!(GRID.contains(p));
                let moved = p.distance(*p_prev);
                assert!(moved <= speed * step.as_secs_f64() + 1e-9, "moved {moved}");
                *p_prev = p;
            }
        }
    }
}
