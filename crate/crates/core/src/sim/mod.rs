//! Deterministic event-driven kernel: virtual clock, ordered event queue and
//! labelled random streams.

mod queue;
mod rng;
mod time;

pub use queue::{Event, EventQueue, ScheduleError};
pub use rng::RngStream;
pub use time::{SimTime, TICKS_PER_SECOND};
