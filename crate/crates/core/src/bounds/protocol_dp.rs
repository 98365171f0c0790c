use serde::{Deserialize, Serialize};

use super::{check_eps, check_pair, srec_entropy_with};
use crate::domain::{output_bits, Distribution, Relation};
use crate::error::{invalid, Error, Result};
use crate::par::{self, Exec};

pub const MAX_DP_SIDE: usize = 8;
pub const MAX_DP_BITS: u32 = 8;
/// Keeps the suffix state space at most 31 per rectangle.
const MAX_DP_OUTPUTS: usize = 16;

/// Whether the final output bits count against the communication budget.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputConvention {
    /// The last `⌈log|Z|⌉` transcript bits are the output and are paid for.
    #[default]
    Charged,
    Free,
}

/// Exact minimum distributional error of deterministic protocols for every
/// budget up to `max_bits`.
///
/// Under [`OutputConvention::Charged`] the output is the last `⌈log|Z|⌉`
/// transcript bits, so the DP state carries the trailing path bits: a
/// subtree on `R` with `b` bits left and path suffix `p` can stop and pad
/// with at most `b` free bits, which fixes the output's leading bits to the
/// tail of `p` when `b < ⌈log|Z|⌉`.
#[derive(Clone, Debug)]
pub struct ProtocolDp {
    out_bits: u32,
    /// Optimal error on `X × Y` from the empty path, per budget.
    root: Vec<f64>,
}

/// Path-suffix states: `(len, bits)` with `len ≤ k`, index `2^len − 1 + bits`.
struct Suffix {
    k: u32,
}

impl Suffix {
    fn count(&self) -> usize {
        (1usize << (self.k + 1)) - 1
    }

    fn decode(&self, s: usize) -> (u32, usize) {
        let len = usize::BITS - (s + 1).leading_zeros() - 1;
        (len, s + 1 - (1 << len))
    }

    fn push(&self, s: usize, bit: usize) -> usize {
        if self.k == 0 {
            return 0;
        }
        let (len, bits) = self.decode(s);
        let len2 = (len + 1).min(self.k);
        let bits2 = ((bits << 1) | bit) & ((1 << len2) - 1);
        (1 << len2) - 1 + bits2
    }
}

impl ProtocolDp {
    pub fn new(f: &Relation, dist: &Distribution, max_bits: u32, convention: OutputConvention, exec: Exec) -> Result<Self> {
        check_pair(f, dist, 0)?;
        let (nx, ny) = (f.x_size(), f.y_size());
        if nx > MAX_DP_SIDE || ny > MAX_DP_SIDE {
            return Err(Error::SizeCap(format!("protocol DP handles at most {MAX_DP_SIDE}×{MAX_DP_SIDE}")));
        }
        if max_bits > MAX_DP_BITS {
            return Err(Error::SizeCap(format!("budget {max_bits} exceeds {MAX_DP_BITS} bits")));
        }
        let nz = f.z_size();
        if nz > MAX_DP_OUTPUTS {
            return Err(Error::SizeCap(format!("|Z| = {nz} exceeds {MAX_DP_OUTPUTS} for the protocol DP")));
        }
        let k = match convention {
            OutputConvention::Charged => output_bits(nz),
            OutputConvention::Free => 0,
        };
        let sfx = Suffix { k };
        let ns = sfx.count();
        let nb = 1usize << ny;
        let (mass, acc) = rectangle_tables(f, dist, exec);
        // Leaf error when `b` padding bits remain after suffix `s`.
        let leaf = |r: usize, b: u32, s: usize| -> f64 {
            let allowed = if b >= k {
                0..nz
            } else {
                let (len, bits) = sfx.decode(s);
                let need = k - b;
                if len < need {
                    return f64::INFINITY;
                }
                let prefix = bits & ((1 << need) - 1);
                let lo = (prefix << b).min(nz);
                lo..(lo + (1 << b)).min(nz)
            };
            let best = allowed.map(|z| acc[r * nz + z]).fold(0.0, f64::max);
            (mass[r] - best).max(0.0)
        };
        let mut root = Vec::with_capacity(max_bits as usize + 1);
        let mut prev: Option<Vec<f64>> = None;
        for b in 0..=max_bits {
            let level = par::map_collect(1 << nx, exec, |a| {
                let mut out = vec![f64::INFINITY; nb * ns];
                if a == 0 {
                    return out;
                }
                for cols in 1..nb {
                    let r = a * nb + cols;
                    for s in 0..ns {
                        let mut best = leaf(r, b, s);
                        if let Some(prev) = &prev {
                            let at = |rr: usize, ss: usize| prev[rr * ns + ss];
                            let (s0, s1) = (sfx.push(s, 0), sfx.push(s, 1));
                            best = best.min(at(r, s0)).min(at(r, s1));
                            for (p, q) in halves(a as u64) {
                                let (rp, rq) = (p as usize * nb + cols, q as usize * nb + cols);
                                best = best.min(at(rp, s0) + at(rq, s1)).min(at(rp, s1) + at(rq, s0));
                            }
                            for (p, q) in halves(cols as u64) {
                                let (rp, rq) = (a * nb + p as usize, a * nb + q as usize);
                                best = best.min(at(rp, s0) + at(rq, s1)).min(at(rp, s1) + at(rq, s0));
                            }
                        }
                        out[cols * ns + s] = best;
                    }
                }
                out
            })
            .concat();
            let full = ((1usize << nx) - 1) * nb + nb - 1;
            root.push(level[full * ns]);
            prev = Some(level);
        }
        Ok(ProtocolDp { out_bits: k, root })
    }

    pub fn out_bits(&self) -> u32 {
        self.out_bits
    }

    pub fn max_bits(&self) -> u32 {
        self.root.len() as u32 - 1
    }

    /// Least error on the whole input space with at most `bits` bits.
    pub fn error(&self, bits: u32) -> f64 {
        self.root[bits.min(self.max_bits()) as usize]
    }
}

/// Splits of `mask` into two nonempty parts, each unordered pair once.
fn halves(mask: u64) -> impl Iterator<Item = (u64, u64)> {
    let low = mask & mask.wrapping_neg();
    let rest = mask ^ low;
    // Submasks of `rest` other than `rest` itself, joined with the low bit.
    let mut sub = rest;
    let mut done = rest == 0;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        sub = (sub.wrapping_sub(1)) & rest;
        let part = sub | low;
        if sub == 0 {
            done = true;
        }
        Some((part, mask ^ part))
    })
}

/// `λ(R)` and `λ(R ∩ {z ∈ f})` for every rectangle `R = rows·2^|Y| + cols`.
fn rectangle_tables(f: &Relation, dist: &Distribution, exec: Exec) -> (Vec<f64>, Vec<f64>) {
    let (nx, ny, nz) = (f.x_size(), f.y_size(), f.z_size());
    let nb = 1usize << ny;
    let per_row = par::map_collect(1 << nx, exec, |a| {
        let mut col_mass = vec![0.0; ny];
        let mut col_z = vec![0.0; ny * nz];
        for x in (0..nx).filter(|x| a >> x & 1 == 1) {
            for y in 0..ny {
                let p = dist.prob(x, y);
                col_mass[y] += p;
                for &z in f.outputs(x, y) {
                    col_z[y * nz + z as usize] += p;
                }
            }
        }
        let mut sm = vec![0.0; nb];
        let mut sz = vec![0.0; nb * nz];
        for cols in 1..nb {
            let low = cols.trailing_zeros() as usize;
            let rest = cols & (cols - 1);
            sm[cols] = sm[rest] + col_mass[low];
            for z in 0..nz {
                sz[cols * nz + z] = sz[rest * nz + z] + col_z[low * nz + z];
            }
        }
        (sm, sz)
    });
    let mut mass = Vec::with_capacity(nb << nx);
    let mut acc = Vec::with_capacity((nb << nx) * nz);
    for (m, a) in per_row {
        mass.extend(m);
        acc.extend(a);
    }
    (mass, acc)
}

/// Least distributional error of a deterministic protocol using at most
/// `bits` bits, output bits included.
pub fn optimal_protocol_error(f: &Relation, dist: &Distribution, bits: u32) -> Result<f64> {
    Ok(ProtocolDp::new(f, dist, bits, OutputConvention::Charged, Exec::Auto)?.error(bits))
}

/// `D^λ_ε(f)`: the least budget whose optimal error is at most `eps`, or
/// `None` if no budget up to [`MAX_DP_BITS`] suffices.
pub fn distributional_complexity(f: &Relation, dist: &Distribution, eps: f64, convention: OutputConvention) -> Result<Option<u32>> {
    check_eps(eps, "eps")?;
    let dp = ProtocolDp::new(f, dist, MAX_DP_BITS, convention, Exec::Auto)?;
    Ok((0..=MAX_DP_BITS).find(|&c| dp.error(c) <= eps + 1e-12))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DgeqsrecCheck {
    pub beta: f64,
    pub precondition_lhs: f64,
    pub precondition_rhs: f64,
    /// `(1+ε′)·δ/β`.
    pub smoothing_eps: f64,
    /// `None` means more than [`MAX_DP_BITS`] bits are needed.
    pub communication: Option<u32>,
    pub srec: f64,
    /// `srec − log(4/ε)`.
    pub lower_bound: f64,
    pub pass: bool,
}

/// Compares `D^λ_ε(f)` with `srec_entropy(f, λ, z, (1+ε′)δ/β, δ) − log(4/ε)`.
pub fn check_dgeqsrec(f: &Relation, dist: &Distribution, z: usize, eps: f64, eps_prime: f64, delta: f64) -> Result<DgeqsrecCheck> {
    check_pair(f, dist, z)?;
    if !(eps > 0.0 && eps < 1.0) || !(eps_prime > 0.0) || !(delta >= 0.0) {
        return Err(invalid("need ε ∈ (0,1), ε′ > 0, δ ≥ 0"));
    }
    let beta = f.singleton_mass(dist, z);
    let smoothing_eps = (1.0 + eps_prime) * delta / beta;
    let lhs = (delta + eps) / (beta - 2.0 * eps);
    if !(beta - 2.0 * eps > 0.0 && lhs < smoothing_eps) {
        return Err(Error::Precondition(format!("(δ+ε)/(β−2ε) = {lhs} must be below (1+ε′)δ/β = {smoothing_eps} with β = {beta} > 2ε")));
    }
    let communication = distributional_complexity(f, dist, eps, OutputConvention::Charged)?;
    let srec = srec_entropy_with(f, dist, z, smoothing_eps.min(1.0), delta, Exec::Auto)?.value;
    let lower_bound = srec - (4.0 / eps).log2();
    let d = communication.map_or(f64::from(MAX_DP_BITS + 1), f64::from);
    Ok(DgeqsrecCheck {
        beta,
        precondition_lhs: lhs,
        precondition_rhs: smoothing_eps,
        smoothing_eps,
        communication,
        srec,
        lower_bound,
        pass: d >= lower_bound - 1e-9,
    })
}
