use rand::distributions::{Distribution as _, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::instance::best_guess;
use crate::domain::{Distribution, Relation};
use crate::error::{invalid, Error, Result};
use crate::par::{map_collect, Exec};
use crate::protocols::{budget_allowance, ProtocolTree};

/// Trials per independently seeded block.
pub const DECAY_BLOCK_TRIALS: u64 = 8192;
/// Longest product simulated.
pub const MAX_DECAY_T: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayPoint {
    pub t: usize,
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub std_error: f64,
}

/// Empirical `Pr[all t coordinates correct]` for `t = 1..=t_max`. This is an
/// illustration of the decay, not a verification of any bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayCurve {
    pub budget_fraction: f64,
    /// Deepest path of the per-coordinate protocol.
    pub depth: usize,
    /// Answer given on coordinates the budget does not cover.
    pub guess: usize,
    /// Exact success probability of one run of the per-coordinate protocol.
    pub per_coordinate_success: f64,
    /// Mass of inputs on which `guess` is acceptable.
    pub guess_success: f64,
    pub seed: u64,
    pub points: Vec<DecayPoint>,
}

/// Simulates the shared-budget product of `base` (see
/// [`ProtocolTree::shared_budget_product`]). Every trial draws one input
/// sequence of length `t_max` and is scored for every prefix, so the curve
/// is non-increasing in `t`. Blocks of trials use ChaCha8 stream `b` of
/// `seed`, which keeps results independent of the thread count.
#[allow(clippy::too_many_arguments)]
pub fn decay_experiment(
    f: &Relation,
    mu: &Distribution,
    base: &ProtocolTree,
    t_max: usize,
    budget_fraction: f64,
    trials: u64,
    seed: u64,
    exec: Exec,
) -> Result<DecayCurve> {
    if trials == 0 {
        return Err(invalid("trials must be positive"));
    }
    if t_max == 0 || t_max > MAX_DECAY_T {
        return Err(invalid(format!("t = {t_max} outside 1..={MAX_DECAY_T}")));
    }
    if !(budget_fraction >= 0.0) || !budget_fraction.is_finite() {
        return Err(invalid(format!("budget fraction {budget_fraction} must be finite and non-negative")));
    }
    if (base.x_size(), base.y_size(), base.z_size()) != (f.x_size(), f.y_size(), f.z_size())
        || (mu.x_size(), mu.y_size()) != (f.x_size(), f.y_size())
    {
        return Err(Error::DimensionMismatch("protocol, relation and distribution shapes differ".into()));
    }
    let inputs = WeightedIndex::new(mu.masses()).map_err(|e| invalid(format!("input law: {e}")))?;
    let guess = best_guess(f, mu);
    let depth = base.depth();
    let ny = f.y_size();
    // Outcome of one run of `base` on each input cell.
    let mut solved_ok = Vec::with_capacity(mu.masses().len());
    let mut cost = Vec::with_capacity(mu.masses().len());
    for x in 0..f.x_size() {
        for y in 0..ny {
            let run = base.run(x, y)?;
            solved_ok.push(f.accepts(x, y, run.output));
            cost.push(base.leaves()[run.leaf].depth);
        }
    }
    let guess_ok: Vec<bool> = (0..f.x_size() * ny).map(|c| f.accepts(c / ny, c % ny, guess)).collect();
    let funded: Vec<usize> = (0..t_max).map(|i| budget_allowance(budget_fraction, i, depth)).collect();

    let blocks = trials.div_ceil(DECAY_BLOCK_TRIALS);
    // Per block: how many trials first fail at coordinate i (index t_max = never).
    let parts = map_collect(blocks as usize, exec, |b| {
        let n = DECAY_BLOCK_TRIALS.min(trials - b as u64 * DECAY_BLOCK_TRIALS);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let mut first_fail = vec![0u64; t_max + 1];
        for _ in 0..n {
            let mut spent = 0;
            let mut fail = t_max;
            for (i, &allow) in funded.iter().enumerate() {
                let cell = inputs.sample(&mut rng);
                let ok = if allow.saturating_sub(spent) >= depth {
                    spent += cost[cell];
                    solved_ok[cell]
                } else {
                    guess_ok[cell]
                };
                if !ok {
                    fail = i;
                    break;
                }
            }
            first_fail[fail] += 1;
        }
        first_fail
    });
    let mut first_fail = vec![0u64; t_max + 1];
    for p in &parts {
        first_fail.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    // Success at t means the first failure is at index ≥ t.
    let mut points = Vec::with_capacity(t_max);
    let mut survivors = trials;
    for t in 1..=t_max {
        survivors -= first_fail[t - 1];
        let p = survivors as f64 / trials as f64;
        points.push(DecayPoint { t, successes: survivors, trials, estimate: p, std_error: (p * (1.0 - p) / trials as f64).sqrt() });
    }
    let mass = |ok: &[bool]| mu.masses().iter().zip(ok).filter(|(_, &k)| k).map(|(m, _)| m).sum::<f64>();
    Ok(DecayCurve { budget_fraction, depth, guess, per_coordinate_success: mass(&solved_ok), guess_success: mass(&guess_ok), seed, points })
}
