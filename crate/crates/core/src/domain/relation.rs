use serde::{Deserialize, Serialize};

use super::Distribution;
use crate::error::{invalid, Error, Result};

/// Largest supported output alphabet.
pub const MAX_OUTPUTS: usize = 1 << 16;

/// A relation `f ⊆ X × Y × Z` stored as the table of accepted outputs
/// `f(x, y)` for every input pair. Total functions have singleton cells;
/// promise inputs accept every output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    x_size: usize,
    y_size: usize,
    z_size: usize,
    /// Row-major `x * y_size + y`, each cell sorted and deduplicated.
    accept: Vec<Vec<u32>>,
}

impl Relation {
    pub fn new(x_size: usize, y_size: usize, z_size: usize, accept: Vec<Vec<u32>>) -> Result<Self> {
        if x_size == 0 || y_size == 0 || z_size == 0 {
            return Err(invalid("relation dimensions must be positive"));
        }
        if z_size > MAX_OUTPUTS {
            return Err(Error::SizeCap(format!("|Z| = {z_size} exceeds {MAX_OUTPUTS}")));
        }
        if accept.len() != x_size * y_size {
            return Err(Error::DimensionMismatch(format!("accept table has {} cells, expected {}", accept.len(), x_size * y_size)));
        }
        let mut accept = accept;
        for cell in &mut accept {
            cell.sort_unstable();
            cell.dedup();
            if let Some(&z) = cell.last() {
                if z as usize >= z_size {
                    return Err(invalid(format!("output {z} outside 0..{z_size}")));
                }
            }
        }
        Ok(Relation { x_size, y_size, z_size, accept })
    }

    /// Builds a total function from its value table (row-major).
    pub fn from_function(x_size: usize, y_size: usize, z_size: usize, values: &[usize]) -> Result<Self> {
        let accept = values.iter().map(|&z| vec![z as u32]).collect();
        Relation::new(x_size, y_size, z_size, accept)
    }

    /// Builds a total function by evaluating `f` on every input pair.
    pub fn tabulate(x_size: usize, y_size: usize, z_size: usize, f: impl Fn(usize, usize) -> usize) -> Result<Self> {
        let mut values = Vec::with_capacity(x_size * y_size);
        for x in 0..x_size {
            for y in 0..y_size {
                values.push(f(x, y));
            }
        }
        Relation::from_function(x_size, y_size, z_size, &values)
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn z_size(&self) -> usize {
        self.z_size
    }

    #[inline]
    pub fn outputs(&self, x: usize, y: usize) -> &[u32] {
        &self.accept[x * self.y_size + y]
    }

    #[inline]
    pub fn accepts(&self, x: usize, y: usize, z: usize) -> bool {
        self.outputs(x, y).binary_search(&(z as u32)).is_ok()
    }

    /// `f(x, y) = {z}`.
    #[inline]
    pub fn is_exactly(&self, x: usize, y: usize, z: usize) -> bool {
        let cell = self.outputs(x, y);
        cell.len() == 1 && cell[0] as usize == z
    }

    /// Every cell holds exactly one output.
    pub fn is_total_function(&self) -> bool {
        self.accept.iter().all(|c| c.len() == 1)
    }

    pub fn is_total_boolean(&self) -> bool {
        self.z_size == 2 && self.is_total_function()
    }

    /// Value table of a total function.
    pub fn function_values(&self) -> Option<Vec<usize>> {
        if !self.is_total_function() {
            return None;
        }
        Some(self.accept.iter().map(|c| c[0] as usize).collect())
    }

    /// `β = Pr_{(x,y)←λ}[f(x,y) = {z}]`.
    pub fn singleton_mass(&self, dist: &Distribution, z: usize) -> f64 {
        let mut total = 0.0;
        for x in 0..self.x_size {
            for y in 0..self.y_size {
                if self.is_exactly(x, y, z) {
                    total += dist.prob(x, y);
                }
            }
        }
        total
    }

    /// `Pr_{(x,y)←λ}[f(x,y) ≠ g(x,y)]`.
    pub fn distance(&self, other: &Relation, dist: &Distribution) -> f64 {
        let mut total = 0.0;
        for x in 0..self.x_size {
            for y in 0..self.y_size {
                if self.outputs(x, y) != other.outputs(x, y) {
                    total += dist.prob(x, y);
                }
            }
        }
        total
    }

    /// The `t`-fold product relation on `X^t × Y^t × Z^t`. Tuples are encoded
    /// little-endian: coordinate `i` is digit `i` in base `|X|` (resp. `|Y|`,
    /// `|Z|`). A tuple of outputs is accepted iff every coordinate is.
    pub fn product(&self, t: usize) -> Result<Relation> {
        if t == 0 {
            return Err(invalid("product arity must be positive"));
        }
        let xs = checked_pow(self.x_size, t)?;
        let ys = checked_pow(self.y_size, t)?;
        let zs = checked_pow(self.z_size, t)?;
        if xs.saturating_mul(ys) > 1 << 20 {
            return Err(Error::SizeCap(format!("|X|^t·|Y|^t = {} exceeds 2^20", xs * ys)));
        }
        if zs > MAX_OUTPUTS {
            return Err(Error::SizeCap(format!("|Z|^t = {zs} exceeds {MAX_OUTPUTS}")));
        }
        let mut accept = Vec::with_capacity(xs * ys);
        let mut xd = vec![0usize; t];
        let mut yd = vec![0usize; t];
        for xt in 0..xs {
            digits(xt, self.x_size, &mut xd);
            for yt in 0..ys {
                digits(yt, self.y_size, &mut yd);
                let mut tuples: Vec<u32> = vec![0];
                let mut place = 1u32;
                for i in 0..t {
                    let cell = self.outputs(xd[i], yd[i]);
                    let mut next = Vec::with_capacity(tuples.len() * cell.len());
                    for &z in cell {
                        for &acc in &tuples {
                            next.push(acc + z * place);
                        }
                    }
                    tuples = next;
                    place *= self.z_size as u32;
                }
                accept.push(tuples);
            }
        }
        Relation::new(xs, ys, zs, accept)
    }
}

pub(crate) fn checked_pow(base: usize, exp: usize) -> Result<usize> {
    let mut acc: usize = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base).filter(|&v| v <= 1 << 40).ok_or_else(|| Error::SizeCap(format!("{base}^{exp} overflows")))?;
    }
    Ok(acc)
}

/// Little-endian base-`base` digits of `value` into `out`.
pub(crate) fn digits(mut value: usize, base: usize, out: &mut [usize]) {
    for d in out.iter_mut() {
        *d = value % base;
        value /= base;
    }
}

/// A relation together with an input distribution; this is the JSON layout
/// shared by every command (`x_size`, `y_size`, `z_size`, `accept`, `mass`).
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub relation: Relation,
    pub distribution: Distribution,
}

#[derive(Serialize, Deserialize)]
struct ProblemJson {
    x_size: usize,
    y_size: usize,
    z_size: usize,
    accept: Vec<Vec<Vec<u32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mass: Option<Vec<Vec<f64>>>,
}

impl Relation {
    fn to_json_parts(&self) -> ProblemJson {
        let accept = (0..self.x_size).map(|x| (0..self.y_size).map(|y| self.outputs(x, y).to_vec()).collect()).collect();
        ProblemJson { x_size: self.x_size, y_size: self.y_size, z_size: self.z_size, accept, mass: None }
    }

    fn from_json_parts(p: &ProblemJson) -> Result<Self> {
        if p.accept.len() != p.x_size || p.accept.iter().any(|row| row.len() != p.y_size) {
            return Err(Error::DimensionMismatch("accept must be an x_size × y_size array".into()));
        }
        let accept = p.accept.iter().flat_map(|row| row.iter().cloned()).collect();
        Relation::new(p.x_size, p.y_size, p.z_size, accept)
    }
}

impl Serialize for Relation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_parts().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Relation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let parts = ProblemJson::deserialize(d)?;
        Relation::from_json_parts(&parts).map_err(serde::de::Error::custom)
    }
}

impl Serialize for Problem {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut parts = self.relation.to_json_parts();
        parts.mass = Some(self.distribution.rows());
        parts.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Problem {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let parts = ProblemJson::deserialize(d)?;
        let relation = Relation::from_json_parts(&parts).map_err(serde::de::Error::custom)?;
        let mass = parts.mass.ok_or_else(|| serde::de::Error::missing_field("mass"))?;
        let distribution = Distribution::from_rows(&mass).map_err(serde::de::Error::custom)?;
        if distribution.x_size() != relation.x_size() || distribution.y_size() != relation.y_size() {
            return Err(serde::de::Error::custom("mass and accept dimensions differ"));
        }
        Ok(Problem { relation, distribution })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq2() -> Relation {
        Relation::tabulate(2, 2, 2, |x, y| (x == y) as usize).unwrap()
    }

    #[test]
    fn rejects_out_of_range_outputs() {
        assert!(Relation::new(1, 1, 2, vec![vec![2]]).is_err());
        assert!(Relation::new(1, 2, 2, vec![vec![0]]).is_err());
        assert!(Relation::new(0, 1, 2, vec![]).is_err());
    }

    #[test]
    fn product_with_one_copy_is_identity() {
        let f = eq2();
        assert_eq!(f.product(1).unwrap(), f);
    }

    #[test]
    fn product_of_equality_accepts_one_tuple_per_cell() {
        let f2 = eq2().product(2).unwrap();
        assert_eq!((f2.x_size(), f2.y_size(), f2.z_size()), (4, 4, 4));
        assert_eq!(f2.outputs(0, 0), &[3]);
        // x = (1,0), y = (1,1): first coordinate equal, second not.
        assert_eq!(f2.outputs(1, 3), &[1]);
    }

    #[test]
    fn product_size_cap() {
        let big = Relation::tabulate(64, 64, 2, |_, _| 0).unwrap();
        assert!(matches!(big.product(2), Err(Error::SizeCap(_))));
    }

    #[test]
    fn promise_cells_multiply_out() {
        let f = Relation::new(1, 1, 2, vec![vec![0, 1]]).unwrap();
        let f2 = f.product(2).unwrap();
        assert_eq!(f2.outputs(0, 0), &[0, 1, 2, 3]);
    }

    #[test]
    fn json_round_trip() {
        let p = Problem { relation: eq2(), distribution: Distribution::uniform(2, 2) };
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"accept\":[[[1],[0]],[[0],[1]]]"));
        let back: Problem = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
