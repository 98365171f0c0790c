use rand::distributions::{Distribution as _, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::derived::derived_quantities;
use super::exact::exact_analysis;
use super::goodsets::idealized_outcome;
use super::hash::{HashDraw, HashFamily, MAX_EXACT_MESSAGES};
use super::SamplerConfig;
use crate::error::{invalid, Error, Result};
use crate::infotheory::l1_distance;
use crate::par::{map_collect, Exec};
use crate::protocols::TranscriptFactorization;

/// Trials per independently seeded block.
pub const BLOCK_TRIALS: u64 = 8192;
/// Largest `T` a simulation will run (iterations are counted in a `u64`
/// exactly).
pub const MAX_SIMULATED_ITERATIONS: f64 = 9_007_199_254_740_992.0;
/// Largest expected number of accepting iterations per trial. Rejected
/// iterations are skipped, so this, not `T`, sets the cost.
pub const MAX_EXPECTED_EVENTS: f64 = 1e5;

/// A proportion with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub trials: u64,
}

impl Estimate {
    fn proportion(hits: u64, trials: u64) -> Option<Estimate> {
        (trials > 0).then(|| {
            let p = hits as f64 / trials as f64;
            Estimate { value: p, std_error: (p * (1.0 - p) / trials as f64).sqrt(), trials }
        })
    }
}

/// A claimed inequality checked against an estimate with a 3σ allowance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatCheck {
    pub name: String,
    pub value: Option<f64>,
    pub std_error: Option<f64>,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub trials: u64,
    pub nonempty: u64,
    pub e: u64,
    pub bc: u64,
    pub h: u64,
    pub agree: u64,
}

impl Counts {
    fn add(&mut self, o: &Counts) {
        self.trials += o.trials;
        self.nonempty += o.nonempty;
        self.e += o.e;
        self.bc += o.bc;
        self.h += o.h;
        self.agree += o.agree;
    }
}

/// Exact values of the simulated statistics, when the message space is
/// small enough to enumerate the hash family.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactReference {
    pub pr_nonempty: f64,
    pub pr_e: f64,
    pub pr_h: f64,
    pub pr_bc_given_e: Option<f64>,
    /// `ℓ1` between the exact `H`-conditioned law and `p·w/C`.
    pub l1_h_to_idealized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplerReport {
    pub config: SamplerConfig,
    pub hash: HashFamily,
    pub seed: u64,
    pub counts: Counts,
    /// `Pr[A ≠ ∅]`.
    pub nonempty: Estimate,
    pub e: Estimate,
    pub h: Estimate,
    /// `Pr[A = B ≠ ⊥]`.
    pub agree: Estimate,
    /// `None` when no trial reached `E`.
    pub bc_given_e: Option<Estimate>,
    /// Counts of `(x, y, m_i)` over trials in `H`, row-major.
    pub histogram: Vec<u64>,
    /// `ℓ1` between the normalized histogram and `p·w/C`.
    pub l1_to_idealized: Option<f64>,
    /// `½ Σ sqrt(π_i(1−π_i)/N_H)` over the idealized law `π`.
    pub l1_sigma: Option<f64>,
    pub l1_to_exact: Option<f64>,
    pub exact: Option<ExactReference>,
    /// The claimed bounds at the configured (possibly reduced) parameters.
    pub checks: Vec<StatCheck>,
    /// Agreement with the exact values within 3σ; informational.
    pub consistency: Vec<StatCheck>,
    pub warnings: Vec<String>,
}

impl SamplerReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MonteCarloOptions {
    pub hash: HashFamily,
    pub exec: Exec,
}

/// Per-iteration acceptance law for one input pair. An iteration matters
/// only when Alice or Bob accepts, so the simulation jumps between such
/// iterations with geometric gaps.
struct CellLaw {
    /// `Pr[Alice or Bob accepts]` in one iteration.
    p_any: f64,
    /// Message law given that someone accepts; `None` when `p_any = 0`.
    messages: Option<WeightedIndex<f64>>,
}

struct Prepared<'a> {
    fac: &'a TranscriptFactorization,
    inputs: WeightedIndex<f64>,
    /// `2^Δ·v_x(m)` and `2^Δ·v_y(m)`.
    alice_beta: Vec<f64>,
    bob_alpha: Vec<f64>,
    cells: Vec<CellLaw>,
    iterations: u64,
    hash: HashFamily,
    hash_bits: u32,
}

impl<'a> Prepared<'a> {
    fn new(fac: &'a TranscriptFactorization, cfg: &SamplerConfig, hash: HashFamily) -> Result<Prepared<'a>> {
        let d = derived_quantities(fac);
        let two_delta = cfg.two_delta();
        let (ny, nm) = (fac.y_size(), fac.m_size());
        // Acceptance regions are boxes anchored at the origin of [0, 2^Δ]².
        let alice_beta: Vec<f64> = d.vx.iter().map(|v| (v * two_delta).min(two_delta)).collect();
        let bob_alpha: Vec<f64> = d.vy.iter().map(|v| (v * two_delta).min(two_delta)).collect();
        let mut cells = Vec::with_capacity(fac.x_size() * ny);
        for x in 0..fac.x_size() {
            for y in 0..ny {
                let (ux, uy) = (fac.ux_row(x), fac.uy_row(y));
                let area: Vec<f64> = (0..nm)
                    .map(|m| {
                        let (aa, ab) = (ux[m].min(two_delta), alice_beta[x * nm + m]);
                        let (ba, bb) = (bob_alpha[y * nm + m], uy[m].min(two_delta));
                        aa * ab + ba * bb - aa.min(ba) * ab.min(bb)
                    })
                    .collect();
                let total: f64 = area.iter().sum();
                let p_any = (total / (nm as f64 * two_delta * two_delta)).min(1.0);
                let messages =
                    if total > 0.0 { Some(WeightedIndex::new(&area).map_err(|e| invalid(format!("message law: {e}")))?) } else { None };
                cells.push(CellLaw { p_any, messages });
            }
        }
        Ok(Prepared {
            fac,
            inputs: WeightedIndex::new(fac.p().masses()).map_err(|e| invalid(format!("input law: {e}")))?,
            alice_beta,
            bob_alpha,
            cells,
            iterations: cfg.iterations as u64,
            hash,
            hash_bits: cfg.hash_bits,
        })
    }

    /// Expected number of accepting iterations per trial, under `p`.
    fn expected_events(&self) -> f64 {
        let law = self.fac.p().masses();
        self.cells.iter().zip(law).map(|(c, w)| w * c.p_any).sum::<f64>() * self.iterations as f64
    }

    fn block(&self, seed: u64, block: u64, trials: u64) -> (Counts, Vec<u64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block);
        let (ny, nm) = (self.fac.y_size(), self.fac.m_size());
        let mut counts = Counts { trials, ..Default::default() };
        let mut hist = vec![0u64; self.fac.x_size() * ny * nm];
        let mut bob_msgs: Vec<usize> = Vec::new();
        let mask = if self.hash_bits == 32 { u32::MAX } else { (1u32 << self.hash_bits) - 1 };
        for _ in 0..trials {
            let cell = self.inputs.sample(&mut rng);
            let (x, y) = (cell / ny, cell % ny);
            let ux = self.fac.ux_row(x);
            let uy = self.fac.uy_row(y);
            let a_beta = &self.alice_beta[x * nm..(x + 1) * nm];
            let b_alpha = &self.bob_alpha[y * nm..(y + 1) * nm];
            let law = &self.cells[cell];
            bob_msgs.clear();
            // (m_i, i ∈ B) for the first i in A.
            let mut first: Option<(usize, bool)> = None;
            if let Some(messages) = &law.messages {
                let log_miss = (-law.p_any).ln_1p();
                let mut next = 0u64;
                loop {
                    // Iterations skipped before the next accepting one.
                    if law.p_any < 1.0 {
                        let u: f64 = 1.0 - rng.gen::<f64>();
                        let gap = (u.ln() / log_miss).floor();
                        if gap >= (self.iterations - next) as f64 {
                            break;
                        }
                        next += gap as u64;
                    }
                    if next >= self.iterations {
                        break;
                    }
                    next += 1;
                    let m = messages.sample(&mut rng);
                    let (alpha, beta) = union_point(&mut rng, (ux[m], a_beta[m]), (b_alpha[m], uy[m]));
                    let alice = alpha <= ux[m] && beta <= a_beta[m];
                    let bob = alpha <= b_alpha[m] && beta <= uy[m];
                    if alice && first.is_none() {
                        first = Some((m, bob));
                    }
                    if bob {
                        bob_msgs.push(m);
                    }
                }
            }
            let h = HashDraw::sample(self.hash, nm, self.hash_bits, &mut rng);
            let r = rng.gen::<u32>() & mask;
            let alice_out = first.filter(|&(m, _)| h.eval(m) == r).map(|(m, _)| self.fac.outputs()[m]);
            let bob_out = bob_msgs.iter().find(|&&m| h.eval(m) == r).map(|&m| self.fac.outputs()[m]);
            if first.is_some() {
                counts.nonempty += 1;
            }
            if alice_out.is_some() && alice_out == bob_out {
                counts.agree += 1;
            }
            if let Some((mi, true)) = first {
                if h.eval(mi) == r {
                    counts.e += 1;
                    if bob_msgs.iter().any(|&m| m != mi && h.eval(m) == r) {
                        counts.bc += 1;
                    } else {
                        counts.h += 1;
                        hist[cell * nm + mi] += 1;
                    }
                }
            }
        }
        (counts, hist)
    }
}

/// A uniform point of `[0,a.0]×[0,a.1] ∪ [0,b.0]×[0,b.1]`, drawn from the
/// disjoint pieces `A`, `(a.0, b.0]×[0,b.1]` and `[0,min]×(a.1, b.1]`.
fn union_point(rng: &mut ChaCha8Rng, a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let right = (b.0 - a.0).max(0.0) * b.1;
    let top = a.0.min(b.0) * (b.1 - a.1).max(0.0);
    let pick = rng.gen::<f64>() * (a.0 * a.1 + right + top);
    let (u, v): (f64, f64) = (rng.gen(), rng.gen());
    if pick < right {
        (a.0 + u * (b.0 - a.0), v * b.1)
    } else if pick < right + top {
        (u * a.0.min(b.0), a.1 + v * (b.1 - a.1))
    } else {
        (u * a.0, v * a.1)
    }
}

fn at_most(name: &str, est: Option<Estimate>, bound: f64) -> StatCheck {
    StatCheck {
        name: name.into(),
        value: est.map(|e| e.value),
        std_error: est.map(|e| e.std_error),
        bound,
        pass: est.is_some_and(|e| e.value - 3.0 * e.std_error <= bound),
    }
}

fn at_least(name: &str, est: Option<Estimate>, bound: f64) -> StatCheck {
    StatCheck {
        name: name.into(),
        value: est.map(|e| e.value),
        std_error: est.map(|e| e.std_error),
        bound,
        pass: est.is_some_and(|e| e.value + 3.0 * e.std_error >= bound),
    }
}

fn matches(name: &str, est: Option<Estimate>, exact: f64) -> StatCheck {
    StatCheck {
        name: name.into(),
        value: est.map(|e| e.value),
        std_error: est.map(|e| e.std_error),
        bound: exact,
        // The standard error under the exact value, so zero-hit runs are judged fairly.
        pass: est.is_some_and(|e| (e.value - exact).abs() <= 3.0 * (exact * (1.0 - exact) / e.trials as f64).sqrt() + 1e-12),
    }
}

/// Simulates the protocol on inputs drawn from `p`. Trials are split into
/// blocks of `BLOCK_TRIALS`, block `b` using ChaCha8 stream `b` of `seed`,
/// so results do not depend on the thread count.
pub fn run_monte_carlo(
    fac: &TranscriptFactorization,
    cfg: &SamplerConfig,
    trials: u64,
    seed: u64,
    opts: &MonteCarloOptions,
) -> Result<SamplerReport> {
    if trials == 0 {
        return Err(invalid("trials must be positive"));
    }
    if cfg.message_count != fac.m_size() {
        return Err(invalid(format!("config has |M| = {}, factorization has {}", cfg.message_count, fac.m_size())));
    }
    if !(cfg.iterations <= MAX_SIMULATED_ITERATIONS) {
        return Err(invalid(format!("T = {} is too large to simulate; use reduced parameters", cfg.iterations)));
    }
    let prep = Prepared::new(fac, cfg, opts.hash)?;
    let events = prep.expected_events();
    if events > MAX_EXPECTED_EVENTS {
        return Err(invalid(format!("about {events:.3e} accepting iterations per trial; use reduced parameters")));
    }
    let blocks = trials.div_ceil(BLOCK_TRIALS);
    let parts = map_collect(blocks as usize, opts.exec, |b| {
        let n = BLOCK_TRIALS.min(trials - b as u64 * BLOCK_TRIALS);
        prep.block(seed, b as u64, n)
    });
    let mut counts = Counts::default();
    let mut histogram = vec![0u64; fac.x_size() * fac.y_size() * fac.m_size()];
    for (c, h) in &parts {
        counts.add(c);
        histogram.iter_mut().zip(h).for_each(|(a, b)| *a += b);
    }

    let nonempty = Estimate::proportion(counts.nonempty, trials).unwrap();
    let e = Estimate::proportion(counts.e, trials).unwrap();
    let h = Estimate::proportion(counts.h, trials).unwrap();
    let agree = Estimate::proportion(counts.agree, trials).unwrap();
    let bc_given_e = Estimate::proportion(counts.bc, counts.e);

    let ideal = idealized_outcome(fac, cfg)?;
    let exact = if fac.m_size() <= MAX_EXACT_MESSAGES {
        match exact_analysis(fac, cfg, opts.hash) {
            Ok(ex) => Some(ex),
            Err(Error::InvalidParameter(_)) | Err(Error::NullEvent(_)) => None,
            Err(other) => return Err(other),
        }
    } else {
        None
    };
    let (l1_to_idealized, l1_sigma, l1_to_exact) = if counts.h > 0 {
        let n = counts.h as f64;
        let emp: Vec<f64> = histogram.iter().map(|&c| c as f64 / n).collect();
        let sigma = 0.5 * ideal.joint.iter().map(|&p| (p * (1.0 - p) / n).sqrt()).sum::<f64>();
        let to_exact = exact.as_ref().map(|ex| l1_distance(&emp, &ex.h_law)).transpose()?;
        (Some(l1_distance(&emp, &ideal.joint)?), Some(sigma), to_exact)
    } else {
        (None, None, None)
    };

    // The idealized law ignores collisions and the T-fold repetition; the
    // exact gap, when known, is allowed on top of the sampling noise.
    let gap = exact.as_ref().map_or(0.0, |ex| ex.l1_h_to_idealized);
    let checks = vec![
        at_most("Pr[B_c|E] <= eps", bc_given_e, cfg.eps),
        at_least("Pr[H] >= (1-23eps/2)2^(-k-Delta-2)", Some(h), cfg.nonabort_bound()),
        StatCheck {
            name: "l1(H histogram, idealized) <= gap + 3 sigma".into(),
            value: l1_to_idealized,
            std_error: l1_sigma,
            bound: gap,
            pass: matches!((l1_to_idealized, l1_sigma), (Some(v), Some(s)) if v <= gap + 3.0 * s),
        },
    ];
    let mut consistency = Vec::new();
    if let Some(ex) = &exact {
        consistency.push(matches("Pr[A nonempty] = exact", Some(nonempty), ex.pr_nonempty));
        consistency.push(matches("Pr[E] = exact", Some(e), ex.pr_e));
        consistency.push(matches("Pr[H] = exact", Some(h), ex.pr_h));
        if let Some(v) = ex.pr_bc_given_e {
            consistency.push(matches("Pr[B_c|E] = exact", bc_given_e, v));
        }
    }
    let mut warnings = Vec::new();
    if !cfg.reduced {
        warnings.push(format!("full-scale parameters: Pr[H] is about 2^-{:.1}", cfg.hash_bits as f64 + cfg.delta + 2.0));
    }
    if counts.h == 0 {
        warnings.push("no trial reached H; histogram statistics are undefined".into());
    }
    Ok(SamplerReport {
        config: cfg.clone(),
        hash: opts.hash,
        seed,
        counts,
        nonempty,
        e,
        h,
        agree,
        bc_given_e,
        histogram,
        l1_to_idealized,
        l1_sigma,
        l1_to_exact,
        exact: exact.map(|ex| ExactReference {
            pr_nonempty: ex.pr_nonempty,
            pr_e: ex.pr_e,
            pr_h: ex.pr_h,
            pr_bc_given_e: ex.pr_bc_given_e,
            l1_h_to_idealized: ex.l1_h_to_idealized,
        }),
        checks,
        consistency,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_family, Distribution};
    use crate::protocols::{factorize, ProtocolTree};
    use crate::sampler::{make_config, Overrides};

    fn reduced(m: usize, delta: f64) -> SamplerConfig {
        make_config(1.5, 0.3, 1.0, m, true, Overrides { delta: Some(delta), ..Default::default() }).unwrap()
    }

    #[test]
    fn degenerate_instance_matches_closed_forms() {
        let fac = TranscriptFactorization::new(Distribution::uniform(2, 2), vec![1.0; 2], vec![1.0; 2], vec![0], 1).unwrap();
        let cfg = reduced(1, 2.0);
        let mut failures = 0;
        for seed in 0..20 {
            let rep = run_monte_carlo(&fac, &cfg, 20_000, seed, &MonteCarloOptions::default()).unwrap();
            assert!(rep.pass(), "{:?}", rep.checks);
            assert_eq!(rep.counts.bc, 0);
            failures += rep.consistency.iter().filter(|c| !c.pass).count();
        }
        // 3σ two-sided at 20 seeds × 4 statistics: a stray miss is possible.
        assert!(failures <= 2, "{failures}");
    }

    #[test]
    fn deterministic_for_a_seed() {
        let (f, p) = make_family("AND", 1).unwrap();
        let fac = factorize(&ProtocolTree::send_then_answer(&f).unwrap(), &p).unwrap();
        let cfg = reduced(fac.m_size(), 2.0);
        let a = run_monte_carlo(&fac, &cfg, 20_000, 7, &MonteCarloOptions::default()).unwrap();
        let b = run_monte_carlo(&fac, &cfg, 20_000, 7, &MonteCarloOptions { exec: Exec::Sequential, ..Default::default() }).unwrap();
        assert_eq!(a, b);
        let c = run_monte_carlo(&fac, &cfg, 20_000, 8, &MonteCarloOptions::default()).unwrap();
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn random_hash_family_runs() {
        let (f, p) = make_family("EQ", 1).unwrap();
        let fac = factorize(&ProtocolTree::send_then_answer(&f).unwrap(), &p).unwrap();
        let cfg = reduced(fac.m_size(), 3.0);
        let rep = run_monte_carlo(&fac, &cfg, 50_000, 3, &MonteCarloOptions { hash: HashFamily::Random, ..Default::default() }).unwrap();
        assert!(rep.pass(), "{:?}", rep.checks);
        assert!(rep.agree.value >= rep.h.value);
    }

    #[test]
    fn full_scale_skips_rejected_iterations() {
        // T is about 4e7 here; only accepting iterations are simulated.
        let (f, p) = make_family("AND", 1).unwrap();
        let fac = factorize(&ProtocolTree::send_then_answer(&f).unwrap(), &p).unwrap();
        let cfg = make_config(1.5, 0.3, 1.0, fac.m_size(), false, Overrides::default()).unwrap();
        assert!(cfg.iterations > 1e7);
        let rep = run_monte_carlo(&fac, &cfg, 20_000, 2, &MonteCarloOptions::default()).unwrap();
        let nonempty = rep.consistency.iter().find(|c| c.name.starts_with("Pr[A nonempty]")).unwrap();
        assert!(nonempty.pass, "{nonempty:?}");
        assert!(rep.warnings.iter().any(|w| w.starts_with("full-scale")));
    }

    #[test]
    fn union_point_stays_in_the_union() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (a, b) = ((0.5, 40.0), (30.0, 0.25));
        let mut in_a = 0;
        for _ in 0..20_000 {
            let (x, y) = union_point(&mut rng, a, b);
            let (ia, ib) = (x <= a.0 && y <= a.1, x <= b.0 && y <= b.1);
            assert!(ia || ib);
            in_a += ia as u32;
        }
        // Area of A over the area of the union.
        let share = 20.0 / (20.0 + 7.5 - 0.125);
        assert!((in_a as f64 / 20_000.0 - share).abs() < 0.015);
    }

    #[test]
    fn infinite_iteration_count_is_refused() {
        let (f, p) = make_family("AND", 1).unwrap();
        let fac = factorize(&ProtocolTree::send_then_answer(&f).unwrap(), &p).unwrap();
        let cfg = make_config(4.0, 0.05, 1.0, fac.m_size(), false, Overrides::default()).unwrap();
        assert!(run_monte_carlo(&fac, &cfg, 10, 0, &MonteCarloOptions::default()).is_err());
    }
}
