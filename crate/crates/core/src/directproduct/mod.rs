//! `t`-fold products of a protocol: success bookkeeping, the conditioned
//! single-coordinate product form, the coordinate-selection argument
//! evaluated exactly at tiny `t`, and a Monte-Carlo decay curve.

mod decay;
mod distribution;
mod goodcoordinate;
mod instance;

pub use decay::{decay_experiment, DecayCurve, DecayPoint, DECAY_BLOCK_TRIALS, MAX_DECAY_T};
pub use distribution::{conditioned_coordinate_factorization, CoordinateFactorization, FACTORIZATION_TOL};
pub use goodcoordinate::{check_goodcoordinate, ChainStep, Comparison, CoordinateBounds, GoodCoordinateReport, CHAIN_TOL};
pub use instance::{best_guess, delta1_for, success_variables, ProductInstance, SuccessVariables};
