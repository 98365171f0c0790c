//! The correlated-sampling protocol: parameters, exact analysis of its
//! acceptance events and good sets, and seeded Monte Carlo runs at reduced
//! scale.

mod config;
mod derived;
mod distclose;
mod exact;
mod goodsets;
mod hash;
mod montecarlo;

pub use config::{full_delta, hash_bits_for, iterations_for, make_config, Overrides, SamplerConfig};
pub use derived::{derived_quantities, DerivedQuantities};
pub use distclose::{check_distclose, random_distclose_instance, DistcloseCheck, DistcloseInstance};
pub use exact::{analytic_accept_probabilities, exact_analysis, AcceptProbabilities, ExactAnalysis, PairEvents};
pub use goodsets::{
    check_preconditions, good_sets, idealized_outcome, ClaimItem, GoodSets, IdealizedOutcome, PairDiagnostics, Preconditions,
};
pub use hash::{HashFamily, MAX_EXACT_MESSAGES, MAX_EXACT_RANDOM_MESSAGES};
pub use montecarlo::{
    run_monte_carlo, Counts, Estimate, ExactReference, MonteCarloOptions, SamplerReport, StatCheck, BLOCK_TRIALS, MAX_EXPECTED_EVENTS,
    MAX_SIMULATED_ITERATIONS,
};
