//! Zero-communication public-coin protocols and the extraction of a
//! low-divergence, low-error rectangle from one that rarely aborts.

mod bridge;
mod extract;
mod protocol;

pub use bridge::{pi_prime_protocol, PiPrimeBridge};
pub use extract::{
    check_hypotheses, extract_rectangle, srec_violation_report, Extraction, GExtraction, Hypotheses, LemmaParams, ViolationReport,
};
pub use protocol::{conditioned_joint, CoinOutcome, ConditionedJoint, ZeroCommProtocol, MAX_COINS};
