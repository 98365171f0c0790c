use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Largest message space for which collision laws are enumerated.
pub const MAX_EXACT_MESSAGES: usize = 64;
/// Largest message space for the fully random family's exact law.
pub const MAX_EXACT_RANDOM_MESSAGES: usize = 14;

/// Hash family `h: M → {0,1}^k` drawn with the public coins.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HashFamily {
    /// `h(m) = A·m ⊕ b` over GF(2); pairwise independent.
    #[default]
    Affine,
    /// A uniformly random function.
    Random,
}

impl std::str::FromStr for HashFamily {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "affine" => Ok(HashFamily::Affine),
            "random" => Ok(HashFamily::Random),
            _ => Err(invalid(format!("unknown hash family {s:?}; expected affine or random"))),
        }
    }
}

/// Bits needed to index `n` messages.
pub(crate) fn index_bits(n: usize) -> u32 {
    usize::BITS - (n.max(1) - 1).leading_zeros()
}

/// A sampled hash function together with the target string `r`.
pub(crate) enum HashDraw {
    Affine { columns: Vec<u32>, offset: u32 },
    Random { values: Vec<u32> },
}

impl HashDraw {
    pub(crate) fn sample<R: Rng + ?Sized>(family: HashFamily, m_size: usize, k: u32, rng: &mut R) -> HashDraw {
        let mask = if k == 32 { u32::MAX } else { (1u32 << k) - 1 };
        match family {
            HashFamily::Affine => {
                let columns = (0..index_bits(m_size)).map(|_| rng.gen::<u32>() & mask).collect();
                HashDraw::Affine { columns, offset: rng.gen::<u32>() & mask }
            }
            HashFamily::Random => HashDraw::Random { values: (0..m_size).map(|_| rng.gen::<u32>() & mask).collect() },
        }
    }

    pub(crate) fn eval(&self, m: usize) -> u32 {
        match self {
            HashDraw::Affine { columns, offset } => {
                let mut acc = *offset;
                let mut bits = m;
                let mut i = 0;
                while bits != 0 {
                    if bits & 1 == 1 {
                        acc ^= columns[i];
                    }
                    bits >>= 1;
                    i += 1;
                }
                acc
            }
            HashDraw::Random { values } => values[m],
        }
    }
}

/// Law of the collision set `S = {m′ ≠ m : h(m′) = h(m)}` for each `m`, as
/// `(bitmask over M, probability)` pairs. The event `h(m) = r` has
/// probability `2^{−k}` and is independent of `S` for both families.
pub(crate) fn collision_laws(m_size: usize, k: u32, family: HashFamily) -> Result<Vec<Vec<(u64, f64)>>> {
    if m_size > MAX_EXACT_MESSAGES {
        return Err(invalid(format!("exact hash analysis supports |M| <= {MAX_EXACT_MESSAGES}, got {m_size}")));
    }
    let hit = (-(k as f64)).exp2();
    match family {
        HashFamily::Affine => {
            let kernels = affine_kernels(index_bits(m_size), k);
            Ok((0..m_size)
                .map(|m| {
                    let mut law: BTreeMap<u64, f64> = BTreeMap::new();
                    for &(kernel, pr) in &kernels {
                        let mut set = 0u64;
                        let mut rest = kernel;
                        while rest != 0 {
                            let d = rest.trailing_zeros() as usize;
                            rest &= rest - 1;
                            if m ^ d < m_size {
                                set |= 1 << (m ^ d);
                            }
                        }
                        *law.entry(set).or_default() += pr;
                    }
                    law.into_iter().collect()
                })
                .collect())
        }
        HashFamily::Random => {
            if m_size > MAX_EXACT_RANDOM_MESSAGES {
                return Err(invalid(format!("exact analysis of the random family supports |M| <= {MAX_EXACT_RANDOM_MESSAGES}")));
            }
            let others = m_size - 1;
            Ok((0..m_size)
                .map(|m| {
                    (0u64..1 << others)
                        .map(|sub| {
                            let size = sub.count_ones() as i32;
                            let pr = hit.powi(size) * (1.0 - hit).powi(others as i32 - size);
                            // Spread the `others`-bit pattern over M∖{m}.
                            let low = sub & ((1 << m) - 1);
                            let high = (sub >> m) << (m + 1);
                            (low | high, pr)
                        })
                        .collect()
                })
                .collect())
        }
    }
}

/// Law of `ker A ∖ {0}` for a uniform `k × l` matrix over GF(2), as bitmasks
/// over `d ∈ [0, 2^l)`. Columns are added one at a time; each is either
/// independent of the earlier ones or equal to one of the `2^rank` vectors
/// they span, which fixes its coordinates in the basis of independent columns.
fn affine_kernels(l: u32, k: u32) -> Vec<(u64, f64)> {
    let total = (k as f64).exp2();
    // (coordinates of each column so far, rank, probability)
    let mut states: Vec<(Vec<u64>, u32, f64)> = vec![(Vec::new(), 0, 1.0)];
    for _ in 0..l {
        let mut next = Vec::new();
        for (coords, rank, pr) in states {
            if rank < k {
                let mut c = coords.clone();
                c.push(1 << rank);
                next.push((c, rank + 1, pr * (total - (rank as f64).exp2()) / total));
            }
            for combo in 0..1u64 << rank {
                let mut c = coords.clone();
                c.push(combo);
                next.push((c, rank, pr / total));
            }
        }
        states = next;
    }
    let mut law: BTreeMap<u64, f64> = BTreeMap::new();
    for (coords, _, pr) in states {
        let mut kernel = 0u64;
        for d in 1u64..1 << l {
            let image = coords.iter().enumerate().filter(|(i, _)| d >> i & 1 == 1).fold(0, |acc, (_, c)| acc ^ c);
            if image == 0 {
                kernel |= 1 << d;
            }
        }
        *law.entry(kernel).or_default() += pr;
    }
    law.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn index_bits_values() {
        assert_eq!(index_bits(1), 0);
        assert_eq!(index_bits(2), 1);
        assert_eq!(index_bits(4), 2);
        assert_eq!(index_bits(5), 3);
    }

    #[test]
    fn kernel_law_matches_brute_force() {
        for (l, k) in [(2u32, 1u32), (2, 3), (3, 2)] {
            let law = affine_kernels(l, k);
            let mut brute: BTreeMap<u64, f64> = BTreeMap::new();
            let n = 1u64 << (k * l);
            for a in 0..n {
                let col = |i: u32| (a >> (i * k)) & ((1 << k) - 1);
                let mut kernel = 0u64;
                for d in 1u64..1 << l {
                    let img = (0..l).filter(|&i| d >> i & 1 == 1).fold(0, |acc, i| acc ^ col(i));
                    if img == 0 {
                        kernel |= 1 << d;
                    }
                }
                *brute.entry(kernel).or_default() += 1.0 / n as f64;
            }
            assert_eq!(law.len(), brute.len());
            for ((a, pa), (b, pb)) in law.iter().zip(&brute) {
                assert_eq!(a, b);
                assert!((pa - pb).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pairwise_collision_probability() {
        // Pr[m′ ∈ S] = 2^{−k} for every m′ ≠ m, for both families.
        for family in [HashFamily::Affine, HashFamily::Random] {
            let laws = collision_laws(5, 3, family).unwrap();
            for (m, law) in laws.iter().enumerate() {
                assert!((law.iter().map(|e| e.1).sum::<f64>() - 1.0).abs() < 1e-12);
                for other in (0..5).filter(|&o| o != m) {
                    let pr: f64 = law.iter().filter(|(s, _)| s >> other & 1 == 1).map(|e| e.1).sum();
                    assert!((pr - 0.125).abs() < 1e-12, "{family:?} {m} {other} {pr}");
                }
                assert!(law.iter().all(|(s, _)| s >> m & 1 == 0));
            }
        }
    }

    #[test]
    fn sampled_hash_is_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = HashDraw::sample(HashFamily::Affine, 8, 4, &mut rng);
        let b = h.eval(0);
        for m1 in 0..8 {
            for m2 in 0..8 {
                assert_eq!(h.eval(m1) ^ h.eval(m2), h.eval(m1 ^ m2) ^ b);
            }
            assert!(h.eval(m1) < 16);
        }
    }
}
