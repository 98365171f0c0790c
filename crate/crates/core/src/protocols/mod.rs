//! Deterministic protocol trees and the product form of their transcript
//! distributions.

mod factorization;
mod tree;

pub use factorization::{factorize, TranscriptFactorization, MAX_FACTORIZATION_CELLS};
pub use tree::{budget_allowance, Leaf, Node, Owner, ProtocolTree, RunResult, MAX_LEAVES, MAX_TRANSCRIPT_BITS};
