//! Scenario configuration.
//!
//! Files are TOML with one table per subsystem; every key is optional and
//! falls back to the defaults below. Unknown keys are rejected.
//!
//! ```toml
//! [scenario]
//! speed = 10.0
//! flows = 5
//! protocol = "drf"
//! drf_threshold = 0.25
//!
//! [radio]
//! tx_power = 0.660
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::RadioParams;
use crate::error::ConfigError;
use crate::sim::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// Epoch-timer feedback.
    Atp,
    /// Dynamic rate feedback.
    Drf,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Atp => "atp",
            Protocol::Drf => "drf",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    /// meters
    pub grid_width: f64,
    /// meters
    pub grid_height: f64,
    pub node_count: usize,
    /// meters per second, shared by every node
    pub speed: f64,
    pub flows: usize,
    /// seconds
    pub duration: f64,
    pub protocol: Protocol,
    /// seconds, epoch-timer period
    pub epoch: f64,
    /// fraction of the last reported rate that triggers dynamic feedback
    pub drf_threshold: f64,
    pub seed: u64,
    /// seconds; when set, sources stop generating new data at this time and
    /// only retransmit afterwards
    #[serde(skip_serializing_if = "Option::is_none")]
    pub app_stop: Option<f64>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            grid_width: 500.0,
            grid_height: 500.0,
            node_count: 50,
            speed: 1.0,
            flows: 1,
            duration: 100.0,
            protocol: Protocol::Drf,
            epoch: 1.0,
            drf_threshold: 0.25,
            seed: 1,
            app_stop: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacParams {
    /// frames
    pub queue_capacity: usize,
    /// seconds; upper bound of the access jitter drawn after a busy medium
    pub jitter_max: f64,
    /// probability that a frame is lost on a hop regardless of range
    pub per_hop_loss: f64,
}

impl Default for MacParams {
    fn default() -> Self {
        MacParams {
            queue_capacity: 50,
            jitter_max: 0.001,
            per_hop_loss: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransportParams {
    /// increase gate fraction
    pub x: f64,
    /// increase divisor
    pub k: f64,
    /// per-node delay smoothing weight
    pub alpha: f64,
    /// receiver delay smoothing weight
    pub alpha_r: f64,
    /// bytes
    pub data_size: u32,
    pub ack_size: u32,
    pub probe_size: u32,
    pub elfn_size: u32,
    pub route_control_size: u32,
    /// seconds of feedback silence before a dynamic-feedback sender re-probes
    pub liveness_timeout: f64,
    /// seconds between unanswered probes
    pub probe_interval: f64,
    /// DATA packets between loss-driven ACKs in epoch mode
    pub sack_every: u32,
    /// seconds between sender liveness checks
    pub liveness_check_interval: f64,
    /// seconds after which a gap-indicated packet is resent regardless of
    /// what the receiver has seen since
    pub retransmit_timeout: f64,
}

impl Default for TransportParams {
    fn default() -> Self {
        TransportParams {
            x: 0.2,
            k: 2.0,
            alpha: 0.75,
            alpha_r: 0.75,
            data_size: 512,
            ack_size: 40,
            probe_size: 40,
            elfn_size: 32,
            route_control_size: 32,
            liveness_timeout: 3.0,
            probe_interval: 1.0,
            sack_every: 20,
            liveness_check_interval: 0.1,
            retransmit_timeout: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsParams {
    /// relative change that counts as a rate change
    pub rate_change_epsilon: f64,
    /// seconds between energy and mobility trace samples
    pub sample_interval: f64,
}

impl Default for MetricsParams {
    fn default() -> Self {
        MetricsParams {
            rate_change_epsilon: 0.05,
            sample_interval: 1.0,
        }
    }
}

/// Explicit topology, overriding random placement and flow selection.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologySpec {
    /// Static node positions `[x, y]`; when non-empty nodes do not move and
    /// `node_count` must match.
    pub positions: Vec<[f64; 2]>,
    /// Explicit `[source, destination]` pairs; when non-empty `flows` must
    /// match.
    pub flow_pairs: Vec<[usize; 2]>,
    /// Per-node fixed hold, seconds, applied to every frame before it may
    /// contend. Counted as queuing delay.
    pub node_hold: Vec<f64>,
}

impl TopologySpec {
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty() && self.flow_pairs.is_empty() && self.node_hold.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub radio: RadioParams,
    pub mac: MacParams,
    pub transport: TransportParams,
    pub metrics: MetricsParams,
    #[serde(skip_serializing_if = "TopologySpec::is_empty")]
    pub topology: TopologySpec,
}

fn duration_ok(key: &str, v: f64, allow_zero: bool) -> Result<SimTime, ConfigError> {
    if !v.is_finite() || v < 0.0 || (!allow_zero && v == 0.0) {
        return Err(ConfigError::invalid(
            key,
            if allow_zero {
                "must be a non-negative number of seconds"
            } else {
                "must be a positive number of seconds"
            },
        ));
    }
    SimTime::exact_from_secs_f64(v).ok_or_else(|| ConfigError::invalid(key, "must be a multiple of 100 ns"))
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Self::parse(text, None)
    }

    fn parse(text: &str, path: Option<&Path>) -> Result<Self, ConfigError> {
        let display = path.map(|p| p.to_path_buf()).unwrap_or_else(|| "<config>".into());
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: display.clone(),
            message: describe_toml_error(text, &e),
        })?;
        cfg.validate().map_err(|e| match e {
            ConfigError::Invalid { key, message, .. } => ConfigError::Invalid {
                line: locate_key(text, &key),
                key,
                message,
                path: path.map(|p| p.to_path_buf()),
            },
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        std::fs::write(path, self.to_toml_string()).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Short stable digest of the resolved configuration.
    pub fn scenario_hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.scenario;
        for (key, v) in [("scenario.grid_width", s.grid_width), ("scenario.grid_height", s.grid_height)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::invalid(key, "must be a positive number of meters"));
            }
        }
        if s.node_count < 2 {
            return Err(ConfigError::invalid("scenario.node_count", "needs at least two nodes"));
        }
        if !(s.speed.is_finite() && s.speed >= 0.0) {
            return Err(ConfigError::invalid("scenario.speed", "must be a non-negative speed"));
        }
        if s.flows == 0 {
            return Err(ConfigError::invalid("scenario.flows", "needs at least one flow"));
        }
        duration_ok("scenario.duration", s.duration, false)?;
        duration_ok("scenario.epoch", s.epoch, false)?;
        if !(s.drf_threshold.is_finite() && s.drf_threshold > 0.0) {
            return Err(ConfigError::invalid("scenario.drf_threshold", "must be a positive fraction"));
        }
        if let Some(stop) = s.app_stop {
            duration_ok("scenario.app_stop", stop, true)?;
        }
        self.radio.validate()?;

        let m = &self.mac;
        if m.queue_capacity == 0 {
            return Err(ConfigError::invalid("mac.queue_capacity", "must hold at least one frame"));
        }
        duration_ok("mac.jitter_max", m.jitter_max, true)?;
        if !(0.0..1.0).contains(&m.per_hop_loss) {
            return Err(ConfigError::invalid("mac.per_hop_loss", "must be a probability in [0, 1)"));
        }

        let t = &self.transport;
        if !(t.x.is_finite() && t.x >= 0.0) {
            return Err(ConfigError::invalid("transport.x", "must be a non-negative fraction"));
        }
        if !(t.k.is_finite() && t.k >= 1.0) {
            return Err(ConfigError::invalid("transport.k", "must be at least 1"));
        }
        for (key, v) in [("transport.alpha", t.alpha), ("transport.alpha_r", t.alpha_r)] {
            if !(0.0..1.0).contains(&v) {
                return Err(ConfigError::invalid(key, "must lie in [0, 1)"));
            }
        }
        for (key, v) in [
            ("transport.data_size", t.data_size),
            ("transport.ack_size", t.ack_size),
            ("transport.probe_size", t.probe_size),
            ("transport.elfn_size", t.elfn_size),
            ("transport.route_control_size", t.route_control_size),
        ] {
            if v == 0 {
                return Err(ConfigError::invalid(key, "packet size must be positive"));
            }
        }
        duration_ok("transport.liveness_timeout", t.liveness_timeout, false)?;
        duration_ok("transport.probe_interval", t.probe_interval, false)?;
        duration_ok("transport.liveness_check_interval", t.liveness_check_interval, false)?;
        duration_ok("transport.retransmit_timeout", t.retransmit_timeout, false)?;
        if t.sack_every == 0 {
            return Err(ConfigError::invalid("transport.sack_every", "must be positive"));
        }

        if !(self.metrics.rate_change_epsilon.is_finite() && self.metrics.rate_change_epsilon > 0.0) {
            return Err(ConfigError::invalid("metrics.rate_change_epsilon", "must be positive"));
        }
        duration_ok("metrics.sample_interval", self.metrics.sample_interval, false)?;

        let topo = &self.topology;
        if !topo.positions.is_empty() {
            if topo.positions.len() != s.node_count {
                return Err(ConfigError::invalid(
                    "topology.positions",
                    format!("lists {} nodes but scenario.node_count is {}", topo.positions.len(), s.node_count),
                ));
            }
            for p in &topo.positions {
                if !(0.0..=s.grid_width).contains(&p[0]) || !(0.0..=s.grid_height).contains(&p[1]) {
                    return Err(ConfigError::invalid("topology.positions", "position outside the grid"));
                }
            }
        }
        if !topo.flow_pairs.is_empty() {
            if topo.flow_pairs.len() != s.flows {
                return Err(ConfigError::invalid(
                    "topology.flow_pairs",
                    format!("lists {} pairs but scenario.flows is {}", topo.flow_pairs.len(), s.flows),
                ));
            }
            for &[a, b] in &topo.flow_pairs {
                if a >= s.node_count || b >= s.node_count || a == b {
                    return Err(ConfigError::invalid(
                        "topology.flow_pairs",
                        "pairs must name two distinct existing nodes",
                    ));
                }
            }
        }
        if !topo.node_hold.is_empty() {
            if topo.node_hold.len() != s.node_count {
                return Err(ConfigError::invalid("topology.node_hold", "needs one entry per node"));
            }
            for &h in &topo.node_hold {
                duration_ok("topology.node_hold", h, true)?;
            }
        }
        Ok(())
    }

    pub fn duration(&self) -> SimTime {
        SimTime::from_secs_f64(self.scenario.duration)
    }

    pub fn epoch(&self) -> SimTime {
        SimTime::from_secs_f64(self.scenario.epoch)
    }

    pub fn rate_cap(&self) -> f64 {
        self.radio.rate_cap(self.transport.data_size)
    }

    /// Identifier used in output rows.
    pub fn scenario_id(&self) -> String {
        let s = &self.scenario;
        match s.protocol {
            Protocol::Atp => format!("atp_e{}_v{}_f{}", s.epoch, s.speed, s.flows),
            Protocol::Drf => format!(
                "drf_t{}_v{}_f{}",
                (s.drf_threshold * 100.0).round() as i64,
                s.speed,
                s.flows
            ),
        }
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ScenarioConfig::parse(&text, Some(path))
}

fn describe_toml_error(text: &str, e: &toml::de::Error) -> String {
    let msg = e.message().trim().to_string();
    match e.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("line {line}: {msg}")
        }
        None => msg,
    }
}

/// 1-based line where `section.key` is assigned, if present.
fn locate_key(text: &str, dotted: &str) -> Option<usize> {
    let (section, key) = dotted.split_once('.')?;
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        let s = &cfg.scenario;
        assert_eq!((s.grid_width, s.grid_height, s.node_count), (500.0, 500.0, 50));
        assert_eq!(cfg.radio.tx_range, 200.0);
        assert_eq!(cfg.radio.interference_range, 500.0);
        assert_eq!(cfg.radio.bitrate, 2_000_000);
        assert_eq!(cfg.radio.prop_delay_ticks(), SimTime(25));
        assert_eq!(cfg.transport.x, 0.2);
        assert_eq!(cfg.transport.k, 2.0);
        assert_eq!(cfg.scenario.drf_threshold, 0.25);
    }

    #[test]
    fn negative_speed_names_key_and_line() {
        let err = ScenarioConfig::from_toml_str("[scenario]\nflows = 5\nspeed = -1\n").unwrap_err();
        assert_eq!(err.key(), Some("scenario.speed"));
        let msg = err.to_string();
        assert!(msg.contains("scenario.speed") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let err = ScenarioConfig::from_toml_str("[scenario]\nspeed = 1.0\nbogus = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn unknown_section_is_rejected() {
        assert!(ScenarioConfig::from_toml_str("[nonsense]\na = 1\n").is_err());
    }

    #[test]
    fn threshold_round_trips() {
        let cfg = ScenarioConfig::from_toml_str("[scenario]\ndrf_threshold = 0.25\n").unwrap();
        let again = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again.scenario.drf_threshold, 0.25);
        assert_eq!(again, cfg);
        assert_eq!(again.scenario_hash(), cfg.scenario_hash());
    }

    #[test]
    fn sub_tick_durations_are_rejected() {
        let err = ScenarioConfig::from_toml_str("[scenario]\nepoch = 1.00000001\n").unwrap_err();
        assert_eq!(err.key(), Some("scenario.epoch"));
    }

    #[test]
    fn topology_must_match_counts() {
        let text = "[scenario]\nnode_count = 3\n[topology]\npositions = [[0.0, 0.0], [1.0, 1.0]]\n";
        let err = ScenarioConfig::from_toml_str(text).unwrap_err();
        assert_eq!(err.key(), Some("topology.positions"));
    }

    #[test]
    fn topology_round_trips() {
        let text = "[scenario]\nnode_count = 3\nspeed = 0.0\n[topology]\npositions = [[0.0, 0.0], [150.0, 0.0], [300.0, 0.0]]\nflow_pairs = [[0, 2]]\n";
        let cfg = ScenarioConfig::from_toml_str(text).unwrap();
        let again = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn load_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.toml");
        std::fs::write(&path, "[scenario]\nspeed = 30.0\nprotocol = \"atp\"\n").unwrap();
        let cfg = load_config(&path).unwrap();
        assert_eq!(cfg.scenario.speed, 30.0);
        assert_eq!(cfg.scenario.protocol, Protocol::Atp);
        assert!(load_config(&dir.path().join("missing.toml")).is_err());
    }
}
