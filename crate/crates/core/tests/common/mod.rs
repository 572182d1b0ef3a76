#![allow(dead_code)]

use drfsim::config::Protocol;
use drfsim::ScenarioConfig;

/// Static scenario with nodes at `positions` and one flow `src -> dst`.
pub fn static_scenario(positions: &[[f64; 2]], src: usize, dst: usize, protocol: Protocol, duration: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.scenario.node_count = positions.len();
    cfg.scenario.flows = 1;
    cfg.scenario.speed = 0.0;
    cfg.scenario.duration = duration;
    cfg.scenario.protocol = protocol;
    cfg.topology.positions = positions.to_vec();
    cfg.topology.flow_pairs = vec![[src, dst]];
    cfg
}

/// Nodes spaced 150 m apart along a line, flow from the first to the last.
pub fn chain(nodes: usize, protocol: Protocol, duration: f64) -> ScenarioConfig {
    let positions: Vec<[f64; 2]> = (0..nodes).map(|i| [10.0 + 150.0 * i as f64, 250.0]).collect();
    let mut cfg = static_scenario(&positions, 0, nodes - 1, protocol, duration);
    cfg.scenario.grid_width = 20.0 + 150.0 * nodes as f64;
    cfg
}

/// Default mobile scenario.
pub fn mobile(protocol: Protocol, speed: f64, flows: usize, seed: u64, duration: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.scenario.protocol = protocol;
    cfg.scenario.speed = speed;
    cfg.scenario.flows = flows;
    cfg.scenario.seed = seed;
    cfg.scenario.duration = duration;
    cfg
}
