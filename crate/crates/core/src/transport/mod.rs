//! Rate-based transport: sender rate control, per-node congestion stamping
//! and receiver feedback under epoch-timer or dynamic-rate policies, with
//! SACK-based reliability.

mod delay;
mod packet;
mod ranges;
mod receiver;
mod sender;

pub use delay::NodeDelayEstimator;
pub use packet::{stamp_congestion, Packet, PacketKind};
pub use ranges::{build_sack, SeqRanges};
pub use receiver::{Arrival, DataOutcome, FeedbackMode, FeedbackTrigger, ReceiverState};
pub use sender::{
    next_rate, AckInfo, AckOutcome, Emission, Liveness, LivenessAction, Phase, SenderParams, SenderState,
    SentRecord,
};
