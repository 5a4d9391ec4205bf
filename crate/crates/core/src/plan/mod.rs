//! Target planning: host enumeration, spoofed-source choice, exclusions and
//! the randomized, rate-limited probe order.

mod bucket;
mod exclusion;
mod hosts;
mod permute;
mod schedule;

pub use bucket::TokenBucket;
pub use exclusion::ExclusionList;
pub use hosts::{enumerate_hosts, spoof_source};
pub use permute::IndexPermutation;
pub use schedule::{build_schedule, ProbePair, Schedule, ScheduleIter, DEFAULT_RATE_PPS};

use thiserror::Error;

use crate::codec::CodecError;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("no probe targets remain after exclusions")]
    EmptyTargets,
    #[error("routing table must be aggregated before scheduling")]
    NotAggregated,
    #[error("rate must be a positive number of packets per second, got {0}")]
    BadRate(f64),
    #[error(transparent)]
    Codec(#[from] CodecError),
}
