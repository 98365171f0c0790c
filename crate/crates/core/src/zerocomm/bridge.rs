use std::collections::BTreeMap;

use serde::Serialize;

use super::protocol::{ZeroCommProtocol, MAX_COINS};
use crate::error::{invalid, Error, Result};
use crate::protocols::TranscriptFactorization;
use crate::sampler::{derived_quantities, HashFamily, SamplerConfig};

/// Largest number of hash draws enumerated for the affine family.
const MAX_HASH_DRAWS: u64 = 1 << 22;

/// The sampling protocol written out as a zero-communication protocol over
/// an explicit coin space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PiPrimeBridge {
    pub protocol: ZeroCommProtocol,
    /// Distinct per-iteration outcomes after merging equivalent draws.
    pub iteration_outcomes: usize,
    /// Distinct sets `{m : h(m) = r}`.
    pub hash_patterns: usize,
    /// `Pr[E]` and `Pr[H]` over the coin space and `p`.
    pub pr_e: f64,
    pub pr_h: f64,
}

/// One iteration's public draw, reduced to what the players see.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Outcome {
    m: usize,
    alice: u64,
    bob: u64,
}

/// Cut points of `[0, 2^Δ]` at every threshold a comparison can use. A draw
/// inside `(b_i, b_{i+1})` passes `≤ t` exactly when `t ≥ b_{i+1}`, so each
/// interval is represented by its upper end.
fn intervals(thresholds: impl Iterator<Item = f64>, top: f64) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = thresholds.map(|t| t.clamp(0.0, top)).chain([0.0, top]).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[1], (w[1] - w[0]) / top)).collect()
}

/// Materializes the coin space `(m_i, α_i, β_i)_{i≤T}, h, r` with `α, β`
/// discretized at the acceptance thresholds, which keeps every acceptance
/// probability exact. Draws that no player can tell apart are merged, and
/// `(h, r)` is reduced to the set `{m : h(m) = r}`.
pub fn pi_prime_protocol(fac: &TranscriptFactorization, cfg: &SamplerConfig, hash: HashFamily) -> Result<PiPrimeBridge> {
    let (nx, ny, nm) = (fac.x_size(), fac.y_size(), fac.m_size());
    if nx > 64 || ny > 64 || nm > 64 {
        return Err(Error::SizeCap("the bridge needs |X|, |Y|, |M| <= 64".into()));
    }
    if cfg.iterations > 16.0 {
        return Err(invalid(format!("T = {} is too large to materialize; override T", cfg.iterations)));
    }
    let t = cfg.iterations as u32;
    let d = derived_quantities(fac);
    let top = cfg.two_delta();
    let mut merged: BTreeMap<Outcome, f64> = BTreeMap::new();
    for m in 0..nm {
        let alphas = intervals((0..nx).map(|x| fac.ux(x, m)).chain((0..ny).map(|y| top * d.vy_row(y)[m])), top);
        let betas = intervals((0..nx).map(|x| top * d.vx_row(x)[m]).chain((0..ny).map(|y| fac.uy(y, m))), top);
        for &(a, pa) in &alphas {
            for &(b, pb) in &betas {
                let alice = (0..nx).filter(|&x| a <= fac.ux(x, m) && b <= top * d.vx_row(x)[m]).fold(0u64, |s, x| s | 1 << x);
                let bob = (0..ny).filter(|&y| a <= top * d.vy_row(y)[m] && b <= fac.uy(y, m)).fold(0u64, |s, y| s | 1 << y);
                *merged.entry(Outcome { m, alice, bob }).or_default() += pa * pb / nm as f64;
            }
        }
    }
    let outcomes: Vec<(Outcome, f64)> = merged.into_iter().collect();
    let patterns = hash_patterns(nm, cfg.hash_bits, hash)?;
    let total = (outcomes.len() as f64).powi(t as i32) * patterns.len() as f64;
    if total > MAX_COINS as f64 {
        return Err(Error::SizeCap(format!("{total} coins exceeds {MAX_COINS}")));
    }
    let n_seq = outcomes.len().pow(t);
    let mut coins = Vec::with_capacity(total as usize);
    let mut alice = Vec::with_capacity(total as usize * nx);
    let mut bob = Vec::with_capacity(total as usize * ny);
    let (mut pr_e, mut pr_h) = (0.0, 0.0);
    let mut seq = vec![0usize; t as usize];
    for s in 0..n_seq {
        let mut rest = s;
        for slot in seq.iter_mut().rev() {
            *slot = rest % outcomes.len();
            rest /= outcomes.len();
        }
        let seq_pr: f64 = seq.iter().map(|&o| outcomes[o].1).product();
        for &(pattern, hp) in &patterns {
            let pr = seq_pr * hp;
            coins.push(pr);
            let hit = |m: usize| pattern >> m & 1 == 1;
            let first_a: Vec<Option<usize>> = (0..nx).map(|x| seq.iter().position(|&o| outcomes[o].0.alice >> x & 1 == 1)).collect();
            for x in 0..nx {
                alice.push(first_a[x].map(|i| outcomes[seq[i]].0.m).filter(|&m| hit(m)).map(|m| fac.outputs()[m]));
            }
            for y in 0..ny {
                let j = seq.iter().find(|&&o| outcomes[o].0.bob >> y & 1 == 1 && hit(outcomes[o].0.m));
                bob.push(j.map(|&o| fac.outputs()[outcomes[o].0.m]));
            }
            if pr == 0.0 {
                continue;
            }
            for x in 0..nx {
                let Some(i) = first_a[x] else { continue };
                let oi = outcomes[seq[i]].0;
                if !hit(oi.m) {
                    continue;
                }
                for y in (0..ny).filter(|&y| oi.bob >> y & 1 == 1) {
                    let w = pr * fac.p().prob(x, y);
                    pr_e += w;
                    let collide = seq.iter().any(|&o| outcomes[o].0.bob >> y & 1 == 1 && outcomes[o].0.m != oi.m && hit(outcomes[o].0.m));
                    if !collide {
                        pr_h += w;
                    }
                }
            }
        }
    }
    // Rounding in the interval lengths leaves the coin law a few ulps off 1.
    let sum: f64 = coins.iter().sum();
    coins.iter_mut().for_each(|c| *c /= sum);
    let protocol = ZeroCommProtocol::new(nx, ny, fac.z_size(), coins, alice, bob)?;
    Ok(PiPrimeBridge { protocol, iteration_outcomes: outcomes.len(), hash_patterns: patterns.len(), pr_e: pr_e / sum, pr_h: pr_h / sum })
}

/// Law of `{m : h(m) = r}` as bitmasks over `M`.
fn hash_patterns(nm: usize, k: u32, hash: HashFamily) -> Result<Vec<(u64, f64)>> {
    let mut law: BTreeMap<u64, f64> = BTreeMap::new();
    match hash {
        HashFamily::Affine => {
            // Only A and b ⊕ r matter.
            let l = usize::BITS - (nm.max(1) - 1).leading_zeros();
            let bits = k as u64 * (l as u64 + 1);
            if bits > 62 || 1u64 << bits > MAX_HASH_DRAWS {
                return Err(Error::SizeCap(format!("2^{bits} affine hash draws exceeds {MAX_HASH_DRAWS}")));
            }
            let n = 1u64 << bits;
            let kmask = (1u64 << k) - 1;
            for draw in 0..n {
                let target = draw & kmask;
                let mut set = 0u64;
                for m in 0..nm {
                    let mut acc = 0u64;
                    for i in 0..l as u64 {
                        if m >> i & 1 == 1 {
                            acc ^= draw >> (k as u64 * (i + 1)) & kmask;
                        }
                    }
                    if acc == target {
                        set |= 1 << m;
                    }
                }
                *law.entry(set).or_default() += 1.0 / n as f64;
            }
        }
        HashFamily::Random => {
            if nm > 20 {
                return Err(Error::SizeCap("the random family is enumerated only for |M| <= 20".into()));
            }
            let hit = (-(k as f64)).exp2();
            for set in 0u64..1 << nm {
                let c = set.count_ones() as i32;
                law.insert(set, hit.powi(c) * (1.0 - hit).powi(nm as i32 - c));
            }
        }
    }
    Ok(law.into_iter().filter(|e| e.1 > 0.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_family, Distribution};
    use crate::protocols::{factorize, ProtocolTree};
    use crate::sampler::{exact_analysis, make_config, Overrides};
    use crate::zerocomm::conditioned_joint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small(q: f64, m: usize, delta: f64, t: u64, k: u32) -> SamplerConfig {
        make_config(1.0, 0.3, q, m, true, Overrides { delta: Some(delta), iterations: Some(t), hash_bits: Some(k) }).unwrap()
    }

    #[test]
    fn matches_exact_analysis() {
        let (f, p) = make_family("AND", 1).unwrap();
        let fac = factorize(&ProtocolTree::send_then_answer(&f).unwrap(), &p).unwrap();
        for hash in [HashFamily::Affine, HashFamily::Random] {
            for (delta, t, k) in [(1.0, 1, 1), (1.0, 2, 1), (2.0, 2, 2), (1.5, 3, 1)] {
                let cfg = small(1.0, fac.m_size(), delta, t, k);
                let bridge = pi_prime_protocol(&fac, &cfg, hash).unwrap();
                let ex = exact_analysis(&fac, &cfg, hash).unwrap();
                assert!((bridge.pr_e - ex.pr_e).abs() < 1e-13, "{hash:?} {t}: {} vs {}", bridge.pr_e, ex.pr_e);
                assert!((bridge.pr_h - ex.pr_h).abs() < 1e-13, "{hash:?} {t}: {} vs {}", bridge.pr_h, ex.pr_h);
                assert!(bridge.protocol.check_rectangles());
            }
        }
    }

    #[test]
    fn fractional_weights_match_exact_analysis() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = Distribution::from_weights(2, 2, (0..4).map(|_| rng.gen_range(0.1..1.0)).collect()).unwrap();
        let ux: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
        let uy: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
        let fac = TranscriptFactorization::new(p, ux, uy, vec![0, 1, 1], 2).unwrap();
        let cfg = small(fac.q(), 3, 1.0, 2, 1);
        let bridge = pi_prime_protocol(&fac, &cfg, HashFamily::Affine).unwrap();
        let ex = exact_analysis(&fac, &cfg, HashFamily::Affine).unwrap();
        assert!((bridge.pr_h - ex.pr_h).abs() < 1e-13);
        assert!((bridge.pr_e - ex.pr_e).abs() < 1e-13);
    }

    #[test]
    fn single_iteration_agreement_is_h() {
        // With T = 1 there is nothing to collide with, so A = B != bot is E = H.
        let (f, p) = make_family("AND", 1).unwrap();
        let fac = factorize(&ProtocolTree::send_then_answer(&f).unwrap(), &p).unwrap();
        let cfg = small(1.0, fac.m_size(), 1.0, 1, 2);
        let bridge = pi_prime_protocol(&fac, &cfg, HashFamily::Affine).unwrap();
        let j = conditioned_joint(&bridge.protocol, &p).unwrap();
        assert!((j.nonabort - bridge.pr_h).abs() < 1e-15);
        assert_eq!(bridge.pr_e, bridge.pr_h);
    }
}
