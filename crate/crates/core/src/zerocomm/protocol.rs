use serde::{Deserialize, Serialize};

use crate::domain::{Distribution, Rectangle, Relation, MAX_SIDE};
use crate::error::{invalid, Error, Result};
use crate::infotheory::l1_distance;

/// Largest coin space that is enumerated.
pub const MAX_COINS: usize = 1 << 20;

/// A public-coin protocol without communication: on coin `r` Alice outputs
/// `a(x, r)` and Bob outputs `b(y, r)`, each in `Z ∪ {⊥}` (`None` is `⊥`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProtocol")]
pub struct ZeroCommProtocol {
    x_size: usize,
    y_size: usize,
    z_size: usize,
    coins: Vec<f64>,
    /// `a(x, r)` at `r * x_size + x`.
    alice: Vec<Option<usize>>,
    /// `b(y, r)` at `r * y_size + y`.
    bob: Vec<Option<usize>>,
}

#[derive(Deserialize)]
struct RawProtocol {
    x_size: usize,
    y_size: usize,
    z_size: usize,
    coins: Vec<f64>,
    alice: Vec<Option<usize>>,
    bob: Vec<Option<usize>>,
}

impl TryFrom<RawProtocol> for ZeroCommProtocol {
    type Error = Error;

    fn try_from(r: RawProtocol) -> Result<Self> {
        ZeroCommProtocol::new(r.x_size, r.y_size, r.z_size, r.coins, r.alice, r.bob)
    }
}

impl ZeroCommProtocol {
    pub fn new(
        x_size: usize,
        y_size: usize,
        z_size: usize,
        coins: Vec<f64>,
        alice: Vec<Option<usize>>,
        bob: Vec<Option<usize>>,
    ) -> Result<Self> {
        if x_size == 0 || y_size == 0 || z_size == 0 {
            return Err(invalid("protocol dimensions must be positive"));
        }
        if x_size > MAX_SIDE || y_size > MAX_SIDE {
            return Err(Error::SizeCap(format!("input sides are limited to {MAX_SIDE}")));
        }
        if coins.is_empty() || coins.len() > MAX_COINS {
            return Err(Error::SizeCap(format!("coin space of {} outside 1..={MAX_COINS}", coins.len())));
        }
        if coins.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(invalid("coin probabilities must be finite and non-negative"));
        }
        let total: f64 = coins.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("coin probabilities sum to {total}")));
        }
        if alice.len() != coins.len() * x_size || bob.len() != coins.len() * y_size {
            return Err(Error::DimensionMismatch("output tables must cover every (input, coin)".into()));
        }
        if alice.iter().chain(&bob).flatten().any(|&z| z >= z_size) {
            return Err(invalid(format!("outputs must lie in 0..{z_size}")));
        }
        Ok(ZeroCommProtocol { x_size, y_size, z_size, coins, alice, bob })
    }

    /// A single coin on which both players output `z` exactly on `rect`.
    pub fn one_rectangle(x_size: usize, y_size: usize, z_size: usize, rect: Rectangle, z: usize) -> Result<Self> {
        let alice = (0..x_size).map(|x| (rect.rows >> x & 1 == 1).then_some(z)).collect();
        let bob = (0..y_size).map(|y| (rect.cols >> y & 1 == 1).then_some(z)).collect();
        ZeroCommProtocol::new(x_size, y_size, z_size, vec![1.0], alice, bob)
    }

    /// A mixture over coins, coin `r` outputting `z_r` on rectangle `R_r`.
    pub fn rectangle_mixture(x_size: usize, y_size: usize, z_size: usize, parts: &[(f64, Rectangle, usize)]) -> Result<Self> {
        let mut alice = Vec::new();
        let mut bob = Vec::new();
        for &(_, rect, z) in parts {
            alice.extend((0..x_size).map(|x| (rect.rows >> x & 1 == 1).then_some(z)));
            bob.extend((0..y_size).map(|y| (rect.cols >> y & 1 == 1).then_some(z)));
        }
        ZeroCommProtocol::new(x_size, y_size, z_size, parts.iter().map(|p| p.0).collect(), alice, bob)
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

    pub fn coins(&self) -> &[f64] {
        &self.coins
    }

    pub fn alice(&self, x: usize, r: usize) -> Option<usize> {
        self.alice[r * self.x_size + x]
    }

    pub fn bob(&self, y: usize, r: usize) -> Option<usize> {
        self.bob[r * self.y_size + y]
    }

    /// `{x : a(x, r) = z} × {y : b(y, r) = z}`.
    pub fn agree_rectangle(&self, r: usize, z: usize) -> Rectangle {
        let rows = (0..self.x_size).filter(|&x| self.alice(x, r) == Some(z)).fold(0u64, |m, x| m | 1 << x);
        let cols = (0..self.y_size).filter(|&y| self.bob(y, r) == Some(z)).fold(0u64, |m, y| m | 1 << y);
        Rectangle::new(rows, cols)
    }

    /// Rebuilds each `{(x, y) : a(x, r) = b(y, r) = z}` cell by cell and
    /// compares it with `agree_rectangle`.
    pub fn check_rectangles(&self) -> bool {
        (0..self.coins.len()).all(|r| {
            (0..self.z_size).all(|z| {
                let rect = self.agree_rectangle(r, z);
                (0..self.x_size)
                    .all(|x| (0..self.y_size).all(|y| (self.alice(x, r) == Some(z) && self.bob(y, r) == Some(z)) == rect.contains(x, y)))
            })
        })
    }

    fn check_dist(&self, dist: &Distribution) -> Result<()> {
        if dist.x_size() != self.x_size || dist.y_size() != self.y_size {
            return Err(Error::DimensionMismatch("distribution and protocol differ in shape".into()));
        }
        Ok(())
    }
}

/// One coin/output pair with positive conditioned mass.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoinOutcome {
    pub coin: usize,
    pub z: usize,
    pub rectangle: Rectangle,
    /// `Pr[R¹ = r, A¹ = z]`.
    pub mass: f64,
}

/// `X¹Y¹A¹B¹R¹ = (X′Y′ABR | A = B ≠ ⊥)`. Given `R¹ = r, A¹ = z` the inputs
/// are `X′Y′` restricted to `agree_rectangle(r, z)`, so the law is stored by
/// its `(r, z)` blocks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionedJoint {
    /// `Pr[A = B ≠ ⊥]`.
    pub nonabort: f64,
    /// `X¹Y¹`, row-major.
    pub xy: Vec<f64>,
    pub outcomes: Vec<CoinOutcome>,
}

pub fn conditioned_joint(p: &ZeroCommProtocol, dist: &Distribution) -> Result<ConditionedJoint> {
    p.check_dist(dist)?;
    let ny = p.y_size;
    let mut xy = vec![0.0; p.x_size * ny];
    let mut outcomes = Vec::new();
    let mut nonabort = 0.0;
    for (r, &pr) in p.coins.iter().enumerate() {
        if pr == 0.0 {
            continue;
        }
        for z in 0..p.z_size {
            let rect = p.agree_rectangle(r, z);
            let mut mass = 0.0;
            for x in rect.row_indices().take_while(|&x| x < p.x_size) {
                for y in rect.col_indices().take_while(|&y| y < ny) {
                    let w = pr * dist.prob(x, y);
                    xy[x * ny + y] += w;
                    mass += w;
                }
            }
            if mass > 0.0 {
                nonabort += mass;
                outcomes.push(CoinOutcome { coin: r, z, rectangle: rect, mass });
            }
        }
    }
    if !(nonabort > 0.0) {
        return Err(Error::NullEvent("Pr[A = B != bot] = 0".into()));
    }
    xy.iter_mut().for_each(|v| *v /= nonabort);
    outcomes.iter_mut().for_each(|o| o.mass /= nonabort);
    Ok(ConditionedJoint { nonabort, xy, outcomes })
}

impl ConditionedJoint {
    /// `ℓ1(X¹Y¹, X′Y′)`.
    pub fn l1_to(&self, dist: &Distribution) -> Result<f64> {
        l1_distance(&self.xy, dist.masses())
    }

    /// `Pr[(X¹, Y¹, A¹) ∈ f]`.
    pub fn correctness(&self, f: &Relation, dist: &Distribution) -> f64 {
        self.outcomes
            .iter()
            .map(|o| {
                let block = crate::domain::mass_of(&o.rectangle, dist);
                let good = crate::domain::good_mass(&o.rectangle, dist, f, o.z);
                o.mass * good / block
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_family;

    #[test]
    fn one_rectangle_restricts_the_input_law() {
        let dist = Distribution::new(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let p = ZeroCommProtocol::one_rectangle(2, 2, 2, Rectangle::new(0b10, 0b11), 1).unwrap();
        assert!(p.check_rectangles());
        let j = conditioned_joint(&p, &dist).unwrap();
        assert!((j.nonabort - 0.7).abs() < 1e-15);
        let want = [0.0, 0.0, 0.3 / 0.7, 0.4 / 0.7];
        assert!(j.xy.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn always_abort_is_an_error() {
        let dist = Distribution::uniform(2, 2);
        let p = ZeroCommProtocol::new(2, 2, 2, vec![1.0], vec![Some(0), Some(0)], vec![None, None]).unwrap();
        assert!(matches!(conditioned_joint(&p, &dist), Err(Error::NullEvent(_))));
    }

    #[test]
    fn mixture_weights_blocks_by_mass() {
        let dist = Distribution::uniform(2, 2);
        let parts = [(0.25, Rectangle::new(0b01, 0b01), 0), (0.75, Rectangle::new(0b10, 0b11), 1)];
        let p = ZeroCommProtocol::rectangle_mixture(2, 2, 2, &parts).unwrap();
        let j = conditioned_joint(&p, &dist).unwrap();
        // Masses 0.25·0.25 and 0.75·0.5 before normalizing.
        let total = 0.0625 + 0.375;
        assert!((j.nonabort - total).abs() < 1e-15);
        assert!((j.xy[0] - 0.0625 / total).abs() < 1e-15);
        assert!((j.xy[2] - 0.1875 / total).abs() < 1e-15);
        assert_eq!(j.outcomes.len(), 2);
        let (f, _) = make_family("AND", 1).unwrap();
        // Coin 0 outputs 0 on (0,0): correct. Coin 1 outputs 1 on row 1: half right.
        let want = (0.0625 + 0.1875) / total;
        assert!((j.correctness(&f, &dist) - want).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_validates() {
        let p = ZeroCommProtocol::one_rectangle(2, 3, 2, Rectangle::new(0b01, 0b110), 0).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<ZeroCommProtocol>(&s).unwrap(), p);
        let bad = s.replace("\"coins\":[1.0]", "\"coins\":[0.5]");
        assert!(serde_json::from_str::<ZeroCommProtocol>(&bad).is_err());
    }
}
