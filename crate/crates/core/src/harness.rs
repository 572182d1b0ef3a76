//! Scenario runs, parameter sweeps and CSV output.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::config::{Protocol, ScenarioConfig};
use crate::engine::{simulate, RunOptions, RunOutput};
use crate::error::SimError;
use crate::metrics::{summarize, SummaryRow};
use crate::trace::Record;

pub const THRESHOLDS: [f64; 6] = [0.15, 0.25, 0.35, 0.50, 0.65, 0.75];
pub const SPEEDS: [f64; 5] = [1.0, 10.0, 20.0, 30.0, 50.0];
pub const FLOWS: [usize; 3] = [1, 5, 25];
pub const PROTOCOLS: [Protocol; 2] = [Protocol::Atp, Protocol::Drf];
pub const DEFAULT_REPLICATIONS: u32 = 5;

/// A finished run: its summary row plus the raw output.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub summary: SummaryRow,
    pub output: RunOutput,
}

/// Runs one scenario and summarizes it.
pub fn run_scenario(cfg: &ScenarioConfig, opts: RunOptions) -> Result<ScenarioResult, SimError> {
    let output = simulate(cfg, opts)?;
    let summary = summarize(&output.config, &output.log, &output.mobility_hash);
    Ok(ScenarioResult { summary, output })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Axis {
    Thresholds(Vec<f64>),
    Speeds(Vec<f64>),
    Flows(Vec<usize>),
    Protocol(Vec<Protocol>),
}

impl Axis {
    /// The standard points for an axis name.
    pub fn named(name: &str) -> Option<Self> {
        Some(match name {
            "thresholds" => Axis::Thresholds(THRESHOLDS.to_vec()),
            "speeds" => Axis::Speeds(SPEEDS.to_vec()),
            "flows" => Axis::Flows(FLOWS.to_vec()),
            "protocol" => Axis::Protocol(PROTOCOLS.to_vec()),
            _ => return None,
        })
    }

    pub fn len(&self) -> usize {
        match self {
            Axis::Thresholds(v) | Axis::Speeds(v) => v.len(),
            Axis::Flows(v) => v.len(),
            Axis::Protocol(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn apply(&self, i: usize, cfg: &mut ScenarioConfig) {
        match self {
            Axis::Thresholds(v) => {
                cfg.scenario.protocol = Protocol::Drf;
                cfg.scenario.drf_threshold = v[i];
            }
            Axis::Speeds(v) => cfg.scenario.speed = v[i],
            Axis::Flows(v) => cfg.scenario.flows = v[i],
            Axis::Protocol(v) => cfg.scenario.protocol = v[i],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    pub axis: Axis,
    pub replications: u32,
}

impl SweepSpec {
    /// Every run of the sweep, axis-major, replications seeded
    /// `base_seed + r`.
    pub fn configs(&self) -> Vec<ScenarioConfig> {
        let mut out = Vec::with_capacity(self.axis.len() * self.replications as usize);
        for i in 0..self.axis.len() {
            for r in 0..self.replications {
                let mut cfg = self.base.clone();
                self.axis.apply(i, &mut cfg);
                cfg.scenario.seed = self.base.scenario.seed.wrapping_add(u64::from(r));
                out.push(cfg);
            }
        }
        out
    }
}

/// Runs `configs` in parallel and returns their summaries in input order.
/// The first failing run aborts the batch, naming its configuration.
pub fn run_batch(configs: &[ScenarioConfig]) -> Result<Vec<SummaryRow>, SimError> {
    configs
        .par_iter()
        .map(|cfg| {
            log::debug!("running {} seed {}", cfg.scenario_id(), cfg.scenario.seed);
            run_scenario(cfg, RunOptions::default())
                .map(|r| r.summary)
                .map_err(|e| SimError::Run {
                    scenario: format!("{} seed {}\n{}", cfg.scenario_id(), cfg.scenario.seed, cfg.to_toml_string()),
                    source: Box::new(e),
                })
        })
        .collect()
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SummaryRow>, SimError> {
    let configs = spec.configs();
    log::info!("sweep: {} runs", configs.len());
    run_batch(&configs)
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], w: W) -> Result<(), SimError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    if rows.is_empty() {
        out.write_record(summary_header())?;
    }
    out.flush()?;
    Ok(())
}

pub fn summary_header() -> [&'static str; 17] {
    [
        "scenario_id",
        "protocol",
        "threshold_pct",
        "speed_mps",
        "flows",
        "seed",
        "duration_s",
        "throughput_pps",
        "acks_sent",
        "rate_changes",
        "mean_rate_pps",
        "total_energy_j",
        "ack_energy_j",
        "e_joules_per_bit",
        "e_paper_bits_per_joule",
        "scenario_hash",
        "mobility_hash",
    ]
}

pub fn write_summary_file(rows: &[SummaryRow], path: &Path) -> Result<(), SimError> {
    write_summary(rows, BufWriter::new(File::create(path)?))
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>, SimError> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

/// Writes the per-run trace files into `dir`.
pub fn write_traces(out: &RunOutput, dir: &Path) -> Result<(), SimError> {
    fs::create_dir_all(dir)?;
    out.log
        .write_csv(BufWriter::new(File::create(dir.join("events.csv"))?))?;

    let mut rates = csv::Writer::from_path(dir.join("rates.csv"))?;
    rates.write_record(["tick", "flow_id", "role", "rate_pps"])?;
    let mut feedback = csv::Writer::from_path(dir.join("feedback.csv"))?;
    feedback.write_record(["tick", "flow_id", "trigger"])?;
    for r in out.log.iter() {
        match *r {
            Record::Deliver {
                tick,
                flow,
                duplicate: false,
                rate,
                ..
            } => rates.write_record([tick.ticks().to_string(), flow.to_string(), "receiver_R".into(), rate.to_string()])?,
            Record::SenderRate { tick, flow, rate, .. } => {
                rates.write_record([tick.ticks().to_string(), flow.to_string(), "sender_S".into(), rate.to_string()])?
            }
            Record::Feedback {
                tick, flow, trigger, ..
            } => feedback.write_record([tick.ticks().to_string(), flow.to_string(), trigger.as_str().to_string()])?,
            _ => {}
        }
    }
    rates.flush()?;
    feedback.flush()?;

    let mut energy = csv::Writer::from_path(dir.join("energy.csv"))?;
    energy.write_record(["tick", "node_id", "e_tx_j", "e_rx_j", "e_total_j"])?;
    for s in &out.energy_trace {
        energy.write_record([
            s.tick.ticks().to_string(),
            s.node.to_string(),
            s.e_tx.to_string(),
            s.e_rx.to_string(),
            (s.e_tx + s.e_rx).to_string(),
        ])?;
    }
    energy.flush()?;

    let mut mobility = csv::Writer::from_path(dir.join("mobility.csv"))?;
    mobility.write_record(["tick", "node_id", "x", "y"])?;
    for s in &out.mobility_trace {
        mobility.write_record([
            s.tick.ticks().to_string(),
            s.node.to_string(),
            s.position.x.to_string(),
            s.position.y.to_string(),
        ])?;
    }
    mobility.flush()?;
    Ok(())
}

/// The configurations behind each output table of the trend battery.
pub fn paper_suite_batches(seed: u64, replications: u32) -> Vec<(&'static str, Vec<ScenarioConfig>)> {
    let reps = |cfg: ScenarioConfig| {
        (0..replications).map(move |r| {
            let mut c = cfg.clone();
            c.scenario.seed = seed.wrapping_add(u64::from(r));
            c
        })
    };
    let base = ScenarioConfig::default();

    // throughput and ACK counts over thresholds, speeds and loads
    let mut thresholds = Vec::new();
    for &speed in &[1.0, 20.0, 30.0] {
        for &flows in &FLOWS {
            for &t in &THRESHOLDS {
                let mut c = base.clone();
                c.scenario.protocol = Protocol::Drf;
                c.scenario.speed = speed;
                c.scenario.flows = flows;
                c.scenario.drf_threshold = t;
                thresholds.extend(reps(c));
            }
        }
    }

    // ACK energy, epoch timer against dynamic feedback on matched seeds
    let mut energy = Vec::new();
    for &speed in &[1.0, 10.0, 20.0, 30.0] {
        for &flows in &FLOWS {
            for &p in &PROTOCOLS {
                let mut c = base.clone();
                c.scenario.protocol = p;
                c.scenario.speed = speed;
                c.scenario.flows = flows;
                energy.extend(reps(c));
            }
        }
    }

    // rate dynamics of a single flow
    let mut dynamics = Vec::new();
    for &speed in &SPEEDS {
        let mut c = base.clone();
        c.scenario.speed = speed;
        dynamics.extend(reps(c));
    }

    vec![("thresholds", thresholds), ("energy", energy), ("dynamics", dynamics)]
}

/// Runs the full trend battery into `out_dir`: one CSV per batch plus the
/// combined `summary.csv`.
pub fn paper_suite(out_dir: &Path, seed: u64, replications: u32) -> Result<Vec<SummaryRow>, SimError> {
    fs::create_dir_all(out_dir)?;
    let mut all = Vec::new();
    for (name, configs) in paper_suite_batches(seed, replications) {
        log::info!("{name}: {} runs", configs.len());
        let rows = run_batch(&configs)?;
        write_summary_file(&rows, &out_dir.join(format!("{name}.csv")))?;
        all.extend(rows);
    }
    write_summary_file(&all, &out_dir.join("summary.csv"))?;
    Ok(all)
}
