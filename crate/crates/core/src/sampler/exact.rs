use serde::Serialize;

use super::derived::{derived_quantities, DerivedQuantities};
use super::goodsets::{check_preconditions, idealized_outcome, pair_diagnostics, ClaimItem};
use super::hash::{collision_laws, HashFamily};
use super::SamplerConfig;
use crate::error::{invalid, Error, Result};
use crate::infotheory::l1_distance;
use crate::protocols::TranscriptFactorization;

/// Per-iteration acceptance statistics for one input pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AcceptProbabilities {
    pub x: usize,
    pub y: usize,
    /// `α_x/(|M|·2^Δ)`.
    pub alice: f64,
    /// `α_y/(|M|·2^Δ)`.
    pub bob: f64,
    /// `Σ_m w_xy(m)/(|M|·2^{2Δ})`.
    pub both: f64,
    /// `w_xy(m)/(|M|·2^{2Δ})` for each `m`.
    pub both_per_message: Vec<f64>,
    /// `q/(2|M|2^Δ)` and `3q/(2|M|2^Δ)`.
    pub lower: f64,
    pub upper: f64,
    pub in_g1_g2: bool,
    pub alice_within: bool,
    pub bob_within: bool,
}

impl AcceptProbabilities {
    /// The sandwich is only claimed on `G₁ ∩ G₂`.
    pub fn asserted_pass(&self) -> bool {
        !self.in_g1_g2 || (self.alice_within && self.bob_within)
    }
}

fn accept_for(
    fac: &TranscriptFactorization,
    d: &DerivedQuantities,
    cfg: &SamplerConfig,
    x: usize,
    y: usize,
    in_g1_g2: bool,
) -> AcceptProbabilities {
    let two_delta = cfg.two_delta();
    let nm = fac.m_size() as f64;
    let both_per_message: Vec<f64> = (0..fac.m_size())
        .map(|m| {
            let a = fac.ux(x, m).min(two_delta * d.vy_row(y)[m]);
            let b = fac.uy(y, m).min(two_delta * d.vx_row(x)[m]);
            a * b / (nm * two_delta * two_delta)
        })
        .collect();
    let alice = d.alpha_x[x] / (nm * two_delta);
    let bob = d.alpha_y[y] / (nm * two_delta);
    let unit = fac.q() / (nm * two_delta);
    let within = |v: f64| v >= 0.5 * unit - 1e-12 * unit && v <= 1.5 * unit + 1e-12 * unit;
    AcceptProbabilities {
        x,
        y,
        alice,
        bob,
        both: both_per_message.iter().sum(),
        both_per_message,
        lower: 0.5 * unit,
        upper: 1.5 * unit,
        in_g1_g2,
        alice_within: within(alice),
        bob_within: within(bob),
    }
}

pub fn analytic_accept_probabilities(
    fac: &TranscriptFactorization,
    cfg: &SamplerConfig,
    x: usize,
    y: usize,
) -> Result<AcceptProbabilities> {
    if x >= fac.x_size() || y >= fac.y_size() {
        return Err(invalid(format!("input ({x}, {y}) outside {}x{}", fac.x_size(), fac.y_size())));
    }
    let d = derived_quantities(fac);
    let diag = pair_diagnostics(fac, &d, cfg)?;
    let pd = &diag[x * fac.y_size() + y];
    Ok(accept_for(fac, &d, cfg, x, y, pd.in_g1 && pd.in_g2))
}

/// `Σ_{i=1}^{T} (1−a)^{i−1}(1−b)^{T−i}` for `a, b ∈ [0, 1]`, computed from
/// the deficits so that nearly equal ratios do not cancel.
pub(crate) fn geometric_mix(a: f64, b: f64, t: f64) -> f64 {
    let (small, large) = if a <= b { (a, b) } else { (b, a) };
    if small >= 1.0 {
        // Both factors vanish; only the T = 1 term survives.
        return if t == 1.0 { 1.0 } else { 0.0 };
    }
    let diff = large - small;
    let hi = 1.0 - small;
    let hi_pow = ((t - 1.0) * (-small).ln_1p()).exp();
    if diff == 0.0 {
        return t * hi_pow;
    }
    let ratio = diff / hi;
    if ratio >= 1.0 {
        // The smaller factor is zero: a single term remains.
        return hi_pow;
    }
    hi_pow * -(t * (-ratio).ln_1p()).exp_m1() / ratio
}

/// Exact event probabilities for one input pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairEvents {
    pub x: usize,
    pub y: usize,
    pub p: f64,
    pub accept: AcceptProbabilities,
    /// `Pr[A ≠ ∅ | xy] = 1 − (1 − a)^T`.
    pub nonempty: f64,
    pub e: f64,
    pub h: f64,
    /// `Pr[B_c | xy, E]`; `None` when `Pr[E | xy] = 0`.
    pub bc_given_e: Option<f64>,
}

/// Exact analysis of the protocol's events over the input law `p`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactAnalysis {
    pub hash: HashFamily,
    pub pairs: Vec<PairEvents>,
    pub pr_nonempty: f64,
    pub pr_e: f64,
    pub pr_h: f64,
    pub pr_bc_given_e: Option<f64>,
    /// `(x, y, m_i)` conditioned on `E`, row-major over `X × Y × M`.
    pub e_law: Vec<f64>,
    /// `(x, y, m_i)` conditioned on `H`.
    pub h_law: Vec<f64>,
    /// `p·w/C`, the law used in the closeness argument.
    pub idealized: Vec<f64>,
    pub l1_e_to_idealized: f64,
    pub l1_h_to_idealized: f64,
    /// `ℓ1(XYM, law conditioned on H)`.
    pub l1_h_to_xym: f64,
    /// Claim statements in their stated scopes (pairwise items over
    /// `G₁ ∩ G₂`).
    pub items: Vec<ClaimItem>,
    /// Whether the closeness and information hypotheses hold.
    pub asserted: bool,
}

impl ExactAnalysis {
    pub fn pass(&self) -> bool {
        self.items.iter().all(|i| i.pass)
    }
}

/// Computes `Pr[E|xy]`, `Pr[H|xy]` and the conditioned laws in closed form.
///
/// Iterations are independent given `(x, y)`, and given `m_i = m` with
/// `h(m) = r` the only remaining randomness that matters is the collision set
/// `S = {m′ ≠ m : h(m′) = r}`. Conditioned on `S`, iterations before `i` must
/// avoid `A` and avoid `B ∩ S`, and iterations after `i` must avoid `B ∩ S`,
/// which gives a two-ratio geometric sum.
pub fn exact_analysis(fac: &TranscriptFactorization, cfg: &SamplerConfig, hash: HashFamily) -> Result<ExactAnalysis> {
    if cfg.message_count != fac.m_size() {
        return Err(invalid(format!("config has |M| = {}, factorization has {}", cfg.message_count, fac.m_size())));
    }
    let laws = collision_laws(fac.m_size(), cfg.hash_bits, hash)?;
    let d = derived_quantities(fac);
    let diag = pair_diagnostics(fac, &d, cfg)?;
    let (nx, ny, nm) = (fac.x_size(), fac.y_size(), fac.m_size());
    let t = cfg.iterations;
    let two_delta = cfg.two_delta();
    let hit = (-(cfg.hash_bits as f64)).exp2();
    let mut pairs = Vec::with_capacity(nx * ny);
    let mut e_mass = vec![0.0; nx * ny * nm];
    let mut h_mass = vec![0.0; nx * ny * nm];
    for x in 0..nx {
        for y in 0..ny {
            let pd = &diag[x * ny + y];
            let accept = accept_for(fac, &d, cfg, x, y, pd.in_g1 && pd.in_g2);
            let a = accept.alice;
            let nonempty = -(t * (-a).ln_1p()).exp_m1();
            let first_in_a = geometric_mix(a, 0.0, t);
            // Per-message Bob-only and both-accept probabilities, without the 1/|M|.
            let bob_only: Vec<f64> =
                (0..nm).map(|m| (fac.uy(y, m) * d.vy_row(y)[m] / two_delta - accept.both_per_message[m] * nm as f64).max(0.0)).collect();
            let both: Vec<f64> = accept.both_per_message.iter().map(|v| v * nm as f64).collect();
            let (mut e, mut h) = (0.0, 0.0);
            for m in 0..nm {
                let base = accept.both_per_message[m] * hit;
                if base == 0.0 {
                    continue;
                }
                let em = base * first_in_a;
                let mut hm = 0.0;
                for &(set, pr) in &laws[m] {
                    let (mut b_s, mut c_s) = (0.0, 0.0);
                    let mut rest = set;
                    while rest != 0 {
                        let j = rest.trailing_zeros() as usize;
                        rest &= rest - 1;
                        b_s += both[j] + bob_only[j];
                        c_s += bob_only[j];
                    }
                    hm += pr * geometric_mix(a + c_s / nm as f64, b_s / nm as f64, t);
                }
                hm *= base;
                e += em;
                h += hm;
                let idx = (x * ny + y) * nm + m;
                e_mass[idx] = pd.p * em;
                h_mass[idx] = pd.p * hm;
            }
            pairs.push(PairEvents { x, y, p: pd.p, accept, nonempty, e, h, bc_given_e: (e > 0.0).then(|| (1.0 - h / e).max(0.0)) });
        }
    }
    let pr_nonempty = pairs.iter().map(|e| e.p * e.nonempty).sum();
    let pr_e: f64 = e_mass.iter().sum();
    let pr_h: f64 = h_mass.iter().sum();
    if !(pr_h > 0.0) {
        return Err(Error::NullEvent("Pr[H] = 0".into()));
    }
    let e_law: Vec<f64> = e_mass.iter().map(|v| v / pr_e).collect();
    let h_law: Vec<f64> = h_mass.iter().map(|v| v / pr_h).collect();
    let ideal = idealized_outcome(fac, cfg)?;
    let xym = fac.joint()?;

    let scale = (-(cfg.hash_bits as f64) - cfg.delta - 2.0).exp2();
    let good: Vec<&PairEvents> = pairs.iter().filter(|e| e.accept.in_g1_g2).collect();
    let worst = |vals: Vec<f64>, lowest: bool| {
        vals.into_iter().fold(if lowest { f64::INFINITY } else { f64::NEG_INFINITY }, |acc, v| if lowest { acc.min(v) } else { acc.max(v) })
    };
    let mut items = Vec::new();
    if !good.is_empty() {
        let unit = good[0].accept.lower * 2.0;
        let acc: Vec<f64> = good.iter().flat_map(|e| [e.accept.alice, e.accept.bob]).collect();
        items.push(ClaimItem::at_least("accept prob >= q/(2|M|2^Delta) on G1&G2", worst(acc.clone(), true), 0.5 * unit));
        items.push(ClaimItem::at_most("accept prob <= 3q/(2|M|2^Delta) on G1&G2", worst(acc, false), 1.5 * unit));
        let bc = worst(good.iter().filter_map(|e| e.bc_given_e).collect(), false).max(0.0);
        items.push(ClaimItem::at_most("Pr[B_c | xy, E] <= eps on G1&G2", bc, cfg.eps));
        let hmin = worst(good.iter().map(|e| e.h).collect(), true);
        items.push(ClaimItem::at_least("Pr[H | xy] >= (1-4eps)2^(-k-Delta-2) on G1&G2", hmin, (1.0 - 4.0 * cfg.eps) * scale));
    }
    items.push(ClaimItem::at_least("Pr[H] >= (1-23eps/2)2^(-k-Delta-2)", pr_h, cfg.nonabort_bound()));
    Ok(ExactAnalysis {
        hash,
        pr_nonempty,
        pr_e,
        pr_h,
        pr_bc_given_e: (pr_e > 0.0).then(|| (1.0 - pr_h / pr_e).max(0.0)),
        l1_e_to_idealized: l1_distance(&e_law, &ideal.joint)?,
        l1_h_to_idealized: l1_distance(&h_law, &ideal.joint)?,
        l1_h_to_xym: l1_distance(&h_law, xym.probs())?,
        e_law,
        h_law,
        idealized: ideal.joint,
        items,
        asserted: check_preconditions(fac, cfg, None)?.pass(),
        pairs,
    })
}
