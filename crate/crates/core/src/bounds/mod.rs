//! Rectangle and smooth-rectangle bounds: entropy forms by enumeration, the
//! covering LP with its dual, the dual-to-distribution extraction, and the
//! optimal-protocol DP used to compare against communication cost.

mod eqv;
mod lrec;
mod protocol_dp;
mod smooth;
mod srec_lp;

pub use eqv::{lemma_eqv_extract, EqvExtraction};
pub use lrec::{lrec, lrec_with, RectangleBoundResult, MAX_LREC_SIDE};
pub use protocol_dp::{
    check_dgeqsrec, distributional_complexity, optimal_protocol_error, DgeqsrecCheck, OutputConvention, ProtocolDp, MAX_DP_BITS,
    MAX_DP_SIDE,
};
pub use smooth::{srec_entropy, srec_entropy_with, SmoothRectangleResult, MAX_SMOOTH_CELLS};
pub use srec_lp::{
    rectangle_separation, separation_brute_force, srec_lp, srec_lp_full_enumeration, srec_lp_with, LpBoundResult, Separation,
    MAX_SEPARATION_SIDE,
};

use crate::domain::{Distribution, Relation};
use crate::error::{invalid, Error, Result};

fn check_eps(eps: f64, name: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(invalid(format!("{name} = {eps} must lie in [0, 1]")));
    }
    Ok(())
}

fn check_pair(g: &Relation, dist: &Distribution, z: usize) -> Result<()> {
    if g.x_size() != dist.x_size() || g.y_size() != dist.y_size() {
        return Err(Error::DimensionMismatch(format!(
            "relation is {}×{} but distribution is {}×{}",
            g.x_size(),
            g.y_size(),
            dist.x_size(),
            dist.y_size()
        )));
    }
    if z >= g.z_size() {
        return Err(invalid(format!("output {z} outside Z of size {}", g.z_size())));
    }
    Ok(())
}
