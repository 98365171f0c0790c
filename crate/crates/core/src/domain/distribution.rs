use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const NORMALIZATION_TOL: f64 = 1e-9;

/// A probability mass function on `X × Y`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    x_size: usize,
    y_size: usize,
    mass: Vec<f64>,
}

impl Distribution {
    pub fn new(x_size: usize, y_size: usize, mass: Vec<f64>) -> Result<Self> {
        if x_size == 0 || y_size == 0 {
            return Err(invalid("distribution dimensions must be positive"));
        }
        if mass.len() != x_size * y_size {
            return Err(Error::DimensionMismatch(format!("mass table has {} entries, expected {}", mass.len(), x_size * y_size)));
        }
        if mass.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(invalid("masses must be finite and non-negative"));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(invalid(format!("masses sum to {total}, not 1")));
        }
        Ok(Distribution { x_size, y_size, mass })
    }

    /// Normalizes arbitrary non-negative weights.
    pub fn from_weights(x_size: usize, y_size: usize, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(invalid("weights must have positive total"));
        }
        Distribution::new(x_size, y_size, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(x_size: usize, y_size: usize) -> Self {
        let n = x_size * y_size;
        Distribution { x_size, y_size, mass: vec![1.0 / n as f64; n] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let x_size = rows.len();
        let y_size = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != y_size) {
            return Err(Error::DimensionMismatch("ragged mass table".into()));
        }
        Distribution::new(x_size, y_size, rows.concat())
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.mass.chunks(self.y_size).map(<[f64]>::to_vec).collect()
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    #[inline]
    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.mass[x * self.y_size + y]
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        self.mass.chunks(self.y_size).map(|row| row.iter().sum()).collect()
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.y_size];
        for row in self.mass.chunks(self.y_size) {
            for (o, m) in out.iter_mut().zip(row) {
                *o += m;
            }
        }
        out
    }

    /// `p(y | x)`, or `None` when `p(x) = 0`.
    pub fn cond_y_given_x(&self, x: usize) -> Option<Vec<f64>> {
        let row = &self.mass[x * self.y_size..(x + 1) * self.y_size];
        let px: f64 = row.iter().sum();
        (px > 0.0).then(|| row.iter().map(|m| m / px).collect())
    }

    /// `p(x | y)`, or `None` when `p(y) = 0`.
    pub fn cond_x_given_y(&self, y: usize) -> Option<Vec<f64>> {
        let col: Vec<f64> = (0..self.x_size).map(|x| self.prob(x, y)).collect();
        let py: f64 = col.iter().sum();
        (py > 0.0).then(|| col.iter().map(|m| m / py).collect())
    }

    /// The `t`-fold product `μ^t` with little-endian tuple encoding.
    pub fn product(&self, t: usize) -> Result<Distribution> {
        let xs = super::relation::checked_pow(self.x_size, t)?;
        let ys = super::relation::checked_pow(self.y_size, t)?;
        if xs.saturating_mul(ys) > 1 << 20 {
            return Err(Error::SizeCap(format!("|X|^t·|Y|^t = {} exceeds 2^20", xs * ys)));
        }
        let mut mass = vec![0.0; xs * ys];
        let mut xd = vec![0; t];
        let mut yd = vec![0; t];
        for xt in 0..xs {
            super::relation::digits(xt, self.x_size, &mut xd);
            for yt in 0..ys {
                super::relation::digits(yt, self.y_size, &mut yd);
                mass[xt * ys + yt] = xd.iter().zip(&yd).map(|(&x, &y)| self.prob(x, y)).product();
            }
        }
        Ok(Distribution { x_size: xs, y_size: ys, mass })
    }
}

#[derive(Serialize, Deserialize)]
struct DistributionJson {
    x_size: usize,
    y_size: usize,
    mass: Vec<Vec<f64>>,
}

impl Serialize for Distribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DistributionJson { x_size: self.x_size, y_size: self.y_size, mass: self.rows() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Distribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = DistributionJson::deserialize(d)?;
        let dist = Distribution::from_rows(&j.mass).map_err(serde::de::Error::custom)?;
        if dist.x_size != j.x_size || dist.y_size != j.y_size {
            return Err(serde::de::Error::custom("declared sizes disagree with mass table"));
        }
        Ok(dist)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_unnormalized() {
        assert!(Distribution::new(1, 2, vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(1, 2, vec![-0.5, 1.5]).is_err());
    }

    #[test]
    fn product_of_uniform_is_uniform() {
        let d = Distribution::uniform(2, 2).product(2).unwrap();
        assert!(d.masses().iter().all(|&m| (m - 1.0 / 16.0).abs() < 1e-15));
    }

    proptest! {
        #[test]
        fn marginals_and_conditionals_resum(w in proptest::collection::vec(0.01f64..1.0, 12)) {
            let d = Distribution::from_weights(3, 4, w).unwrap();
            let px = d.marginal_x();
            let py = d.marginal_y();
            prop_assert!((px.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!((py.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for x in 0..3 {
                let c = d.cond_y_given_x(x).unwrap();
                for y in 0..4 {
                    prop_assert!((c[y] * px[x] - d.prob(x, y)).abs() < 1e-9);
                }
            }
            for y in 0..4 {
                let c = d.cond_x_given_y(y).unwrap();
                for x in 0..3 {
                    prop_assert!((c[x] * py[y] - d.prob(x, y)).abs() < 1e-9);
                }
            }
        }
    }
}
