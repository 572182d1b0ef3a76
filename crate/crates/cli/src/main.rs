use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use drfsim::harness::{self, write_summary_file, write_traces, Axis, SweepSpec, DEFAULT_REPLICATIONS};
use drfsim::{load_config, RunOptions, ScenarioConfig};

#[derive(Parser)]
#[command(name = "drfsim", version, about = "Rate-feedback transport simulator for mobile ad hoc networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its summary row.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `scenario.seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write event, rate, feedback, energy and mobility traces.
        #[arg(long)]
        traces: bool,
    },
    /// Sweep one parameter axis with replications.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// thresholds, speeds, flows or protocol
        #[arg(long)]
        axis: String,
        #[arg(long, default_value_t = DEFAULT_REPLICATIONS)]
        replications: u32,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the full trend battery over default scenarios.
    PaperSuite {
        #[arg(long)]
        out: PathBuf,
        /// Master seed; replication r uses seed + r.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_REPLICATIONS)]
        replications: u32,
    },
}

fn load(path: &PathBuf) -> Result<ScenarioConfig> {
    Ok(load_config(path)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            traces,
        } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.scenario.seed = s;
            }
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let result = harness::run_scenario(&cfg, RunOptions { traces })?;
            write_summary_file(std::slice::from_ref(&result.summary), &out.join("summary.csv"))?;
            cfg.save(&out.join("config.toml"))?;
            if traces {
                write_traces(&result.output, &out)?;
            }
            let s = &result.summary;
            println!(
                "{} seed {}: throughput {:.1} pkt/s, {} ACKs, {:.4} J ACK energy",
                s.scenario_id, s.seed, s.throughput_pps, s.acks_sent, s.ack_energy_j
            );
        }
        Command::Sweep {
            config,
            axis,
            replications,
            out,
        } => {
            let base = load(&config)?;
            let Some(axis) = Axis::named(&axis) else {
                bail!("unknown axis `{axis}` (expected thresholds, speeds, flows or protocol)");
            };
            if replications == 0 {
                bail!("--replications must be at least 1");
            }
            let spec = SweepSpec {
                base,
                axis,
                replications,
            };
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let rows = harness::run_sweep(&spec)?;
            write_summary_file(&rows, &out.join("summary.csv"))?;
            println!("{} runs written to {}", rows.len(), out.join("summary.csv").display());
        }
        Command::PaperSuite {
            out,
            seed,
            replications,
        } => {
            if replications == 0 {
                bail!("--replications must be at least 1");
            }
            let rows = harness::paper_suite(&out, seed, replications)?;
            println!("{} runs written to {}", rows.len(), out.join("summary.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
