//! Rectangle and smooth-rectangle lower bounds for small two-party
//! functions, with exact verification of the correlated-sampling and
//! direct-product machinery built on them.

// `!(x >= 0.0)` is used on purpose so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Table code indexes several arrays by the same loop variable.
#![allow(clippy::needless_range_loop)]

pub mod bounds;
pub mod directproduct;
pub mod domain;
pub mod error;
pub mod infotheory;
pub mod lp;
pub mod par;
pub mod protocols;
pub mod sampler;
pub mod zerocomm;

pub use error::{Error, Result};
