use serde::Serialize;

use super::ProtocolTree;
use crate::domain::{Distribution, Relation};
use crate::error::{invalid, Error, Result};
use crate::infotheory::JointTable;

/// Largest `|X|·|Y|·|M|` a factorization may hold.
pub const MAX_FACTORIZATION_CELLS: usize = 1 << 22;

/// The product form `Pr[XYM = xym] = p(x,y)·u_x(m)·u_y(m) / q`.
///
/// Messages are opaque indices; `outputs[m]` is the output symbol carried by
/// the last bits of message `m`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TranscriptFactorization {
    p: Distribution,
    z_size: usize,
    m_size: usize,
    /// Row-major `x * m_size + m`.
    ux: Vec<f64>,
    /// Row-major `y * m_size + m`.
    uy: Vec<f64>,
    q: f64,
    outputs: Vec<usize>,
}

impl TranscriptFactorization {
    pub fn new(p: Distribution, ux: Vec<f64>, uy: Vec<f64>, outputs: Vec<usize>, z_size: usize) -> Result<Self> {
        let m_size = outputs.len();
        if m_size == 0 {
            return Err(invalid("empty message space"));
        }
        if p.x_size().saturating_mul(p.y_size()).saturating_mul(m_size) > MAX_FACTORIZATION_CELLS {
            return Err(Error::SizeCap(format!("|X|·|Y|·|M| exceeds {MAX_FACTORIZATION_CELLS}")));
        }
        if ux.len() != p.x_size() * m_size || uy.len() != p.y_size() * m_size {
            return Err(Error::DimensionMismatch("u tables do not match |X|×|M| and |Y|×|M|".into()));
        }
        if ux.iter().chain(&uy).any(|&u| !(0.0..=1.0).contains(&u)) {
            return Err(invalid("u values must lie in [0, 1]"));
        }
        if let Some(&z) = outputs.iter().find(|&&z| z >= z_size) {
            return Err(invalid(format!("message output {z} outside 0..{z_size}")));
        }
        let mut fac = TranscriptFactorization { p, z_size, m_size, ux, uy, q: 0.0, outputs };
        fac.q = fac.weight_total(|_| true);
        if !(fac.q > 0.0) {
            return Err(Error::NullEvent("q = Σ p·u_x·u_y is zero".into()));
        }
        Ok(fac)
    }

    fn weight_total(&self, keep: impl Fn(usize) -> bool) -> f64 {
        let mut total = 0.0;
        for x in 0..self.p.x_size() {
            for y in 0..self.p.y_size() {
                let pxy = self.p.prob(x, y);
                if pxy == 0.0 {
                    continue;
                }
                let (ax, by) = (self.ux_row(x), self.uy_row(y));
                total += pxy * (0..self.m_size).filter(|&m| keep(m)).map(|m| ax[m] * by[m]).sum::<f64>();
            }
        }
        total
    }

    pub fn p(&self) -> &Distribution {
        &self.p
    }

    pub fn x_size(&self) -> usize {
        self.p.x_size()
    }

    pub fn y_size(&self) -> usize {
        self.p.y_size()
    }

    pub fn m_size(&self) -> usize {
        self.m_size
    }

    pub fn z_size(&self) -> usize {
        self.z_size
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    #[inline]
    pub fn ux(&self, x: usize, m: usize) -> f64 {
        self.ux[x * self.m_size + m]
    }

    #[inline]
    pub fn uy(&self, y: usize, m: usize) -> f64 {
        self.uy[y * self.m_size + m]
    }

    pub fn ux_row(&self, x: usize) -> &[f64] {
        &self.ux[x * self.m_size..(x + 1) * self.m_size]
    }

    pub fn uy_row(&self, y: usize) -> &[f64] {
        &self.uy[y * self.m_size..(y + 1) * self.m_size]
    }

    /// `Pr[XYM = xym]`.
    #[inline]
    pub fn prob(&self, x: usize, y: usize, m: usize) -> f64 {
        self.p.prob(x, y) * self.ux(x, m) * self.uy(y, m) / self.q
    }

    /// The joint table over `X`, `Y`, `M`.
    pub fn joint(&self) -> Result<JointTable> {
        let (nx, ny, nm) = (self.x_size(), self.y_size(), self.m_size);
        let mut probs = Vec::with_capacity(nx * ny * nm);
        for x in 0..nx {
            for y in 0..ny {
                for m in 0..nm {
                    probs.push(self.prob(x, y, m));
                }
            }
        }
        JointTable::new(&[("X", nx), ("Y", ny), ("M", nm)], probs)
    }

    /// `err_f(XYM) = Pr[(x, y, m̃) ∉ f]`.
    pub fn err_f(&self, f: &Relation) -> Result<f64> {
        if f.x_size() != self.x_size() || f.y_size() != self.y_size() || f.z_size() != self.z_size {
            return Err(Error::DimensionMismatch("relation and factorization shapes differ".into()));
        }
        let mut err = 0.0;
        for x in 0..self.x_size() {
            for y in 0..self.y_size() {
                for m in 0..self.m_size {
                    if !f.accepts(x, y, self.outputs[m]) {
                        err += self.prob(x, y, m);
                    }
                }
            }
        }
        Ok(err)
    }

    /// Conditions on the messages with `keep[m]`: the u values are zeroed
    /// outside the event and `q` is recomputed as `Σ_S p·u_x·u_y`.
    pub fn condition_on_event(&self, keep: &[bool]) -> Result<Self> {
        if keep.len() != self.m_size {
            return Err(Error::DimensionMismatch(format!("event has {} entries for {} messages", keep.len(), self.m_size)));
        }
        let zero_out = |table: &[f64]| -> Vec<f64> {
            table.chunks(self.m_size).flat_map(|row| row.iter().zip(keep).map(|(&u, &k)| if k { u } else { 0.0 })).collect()
        };
        let ux = zero_out(&self.ux);
        let uy = zero_out(&self.uy);
        TranscriptFactorization::new(self.p.clone(), ux, uy, self.outputs.clone(), self.z_size).map_err(|e| match e {
            Error::NullEvent(_) => Error::NullEvent("the conditioning event has probability zero".into()),
            other => other,
        })
    }
}

/// Factorization of a deterministic tree: `u_x(m)` (resp. `u_y(m)`) is 1 iff
/// `x` (resp. `y`) agrees with every Alice (resp. Bob) node on `m`'s path,
/// and `q = 1`.
pub fn factorize(tree: &ProtocolTree, p: &Distribution) -> Result<TranscriptFactorization> {
    if tree.x_size() != p.x_size() || tree.y_size() != p.y_size() {
        return Err(Error::DimensionMismatch("tree and distribution shapes differ".into()));
    }
    let (alice, bob) = tree.consistency();
    let nm = tree.num_leaves();
    let mut ux = vec![0.0; p.x_size() * nm];
    let mut uy = vec![0.0; p.y_size() * nm];
    for m in 0..nm {
        for (x, &ok) in alice[m].iter().enumerate() {
            ux[x * nm + m] = ok as u8 as f64;
        }
        for (y, &ok) in bob[m].iter().enumerate() {
            uy[y * nm + m] = ok as u8 as f64;
        }
    }
    let outputs = tree.leaves().iter().map(|l| l.output).collect();
    TranscriptFactorization::new(p.clone(), ux, uy, outputs, tree.z_size())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_family;
    use crate::protocols::Node;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dist(nx: usize, ny: usize, rng: &mut ChaCha8Rng) -> Distribution {
        Distribution::from_weights(nx, ny, (0..nx * ny).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn depth_zero_tree() {
        let t = ProtocolTree::constant(2, 3, 2, 1).unwrap();
        let fac = factorize(&t, &Distribution::uniform(2, 3)).unwrap();
        assert_eq!(fac.m_size(), 1);
        assert!(fac.ux_row(0).iter().chain(fac.uy_row(2)).all(|&u| u == 1.0));
        assert!((fac.q() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn alice_sends_x() {
        let tree = ProtocolTree::new(2, 2, 2, Node::alice(vec![0, 1], Node::leaf("0"), Node::leaf("1"))).unwrap();
        let fac = factorize(&tree, &Distribution::uniform(2, 2)).unwrap();
        for x in 0..2 {
            for m in 0..2 {
                assert_eq!(fac.ux(x, m), (x == m) as u8 as f64);
                assert_eq!(fac.uy(x, m), 1.0);
            }
        }
    }

    #[test]
    fn reproduces_direct_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let tree = ProtocolTree::random(4, 4, 2, 3, &mut rng).unwrap();
            let p = random_dist(4, 4, &mut rng);
            let fac = factorize(&tree, &p).unwrap();
            let mut total = 0.0;
            for x in 0..4 {
                for y in 0..4 {
                    let leaf = tree.run(x, y).unwrap().leaf;
                    for m in 0..fac.m_size() {
                        let direct = if m == leaf { p.prob(x, y) } else { 0.0 };
                        assert!((fac.prob(x, y, m) - direct).abs() < 1e-12);
                        total += fac.prob(x, y, m);
                    }
                }
            }
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn err_f_matches_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (f, _) = make_family("EQ", 2).unwrap();
        for _ in 0..10 {
            let tree = ProtocolTree::random(4, 4, 2, 3, &mut rng).unwrap();
            let p = random_dist(4, 4, &mut rng);
            let fac = factorize(&tree, &p).unwrap();
            let mut direct = 0.0;
            for x in 0..4 {
                for y in 0..4 {
                    if !f.accepts(x, y, tree.run(x, y).unwrap().output) {
                        direct += p.prob(x, y);
                    }
                }
            }
            // Same terms, different summation order.
            assert!((fac.err_f(&f).unwrap() - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn conditioning() {
        let (f, p) = make_family("AND", 1).unwrap();
        let tree = ProtocolTree::send_then_answer(&f).unwrap();
        let fac = factorize(&tree, &p).unwrap();
        assert_eq!(fac.condition_on_event(&[true; 4]).unwrap(), fac);
        // Leaf 3 is Alice 1, Bob 1.
        let one = fac.condition_on_event(&[false, false, false, true]).unwrap();
        assert!((one.q() - 0.25).abs() < 1e-15);
        assert!((one.prob(1, 1, 3) - 1.0).abs() < 1e-12);
        assert!(matches!(fac.condition_on_event(&[false; 4]), Err(Error::NullEvent(_))));
    }

    #[test]
    fn conditioning_matches_bayes() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..25 {
            let tree = ProtocolTree::random(3, 4, 3, 4, &mut rng).unwrap();
            let fac = factorize(&tree, &random_dist(3, 4, &mut rng)).unwrap();
            let keep: Vec<bool> = (0..fac.m_size()).map(|_| rng.gen_bool(0.5)).collect();
            let Ok(cond) = fac.condition_on_event(&keep) else { continue };
            let joint = fac.joint().unwrap();
            let event: f64 = joint.probs().iter().enumerate().filter(|(i, _)| keep[i % fac.m_size()]).map(|(_, p)| p).sum();
            for (i, &pr) in joint.probs().iter().enumerate() {
                let m = i % fac.m_size();
                let (x, y) = (i / fac.m_size() / 4, i / fac.m_size() % 4);
                let bayes = if keep[m] { pr / event } else { 0.0 };
                assert!((cond.prob(x, y, m) - bayes).abs() < 1e-12);
            }
        }
    }
}
