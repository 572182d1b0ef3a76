//! Discrete-event simulator for rate-based transport over mobile ad hoc
//! networks, comparing epoch-timer feedback with dynamic rate feedback.
//!
//! The layers, bottom up: [`sim`] (clock, event queue, seeded streams),
//! [`mobility`], [`channel`] (radio, medium access, energy), [`routing`],
//! [`transport`], then [`engine`] which wires one run together, [`metrics`]
//! over the resulting [`trace::RunLog`], and [`harness`] for sweeps and CSV.

pub mod channel;
pub mod config;
pub mod engine;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod mobility;
pub mod routing;
pub mod sim;
pub mod trace;
pub mod transport;

pub type NodeId = usize;
pub type FlowId = usize;

pub use channel::{EnergyLedger, RadioParams, TrafficClass};
pub use config::{load_config, Protocol, ScenarioConfig};
pub use engine::{simulate, RunOptions, RunOutput};
pub use error::{ConfigError, SimError};
pub use harness::{paper_suite, run_scenario, run_sweep, Axis, ScenarioResult, SweepSpec};
pub use metrics::SummaryRow;
pub use mobility::{Grid, Mobility, Position};
pub use sim::{EventQueue, RngStream, SimTime};
pub use trace::{Record, RunLog};
