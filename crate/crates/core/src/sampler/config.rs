use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Parameters of the correlated-sampling protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub c: f64,
    pub eps: f64,
    pub q: f64,
    pub message_count: usize,
    /// `Δ = (c/ε + 1)/ε + 2` unless overridden.
    pub delta: f64,
    /// `T = ⌈(2/q)·|M|·2^Δ·ln(1/ε)⌉`. Integer valued; stored as a float
    /// because it overflows any machine integer at full scale.
    pub iterations: f64,
    /// `k = ⌈log((3/ε)·ln(1/ε))⌉`.
    pub hash_bits: u32,
    /// Set when Δ, T or k were shrunk for simulation.
    pub reduced: bool,
}

/// Overrides for a reduced-scale run. `None` fields keep the formula value;
/// T follows the (possibly overridden) Δ.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub delta: Option<f64>,
    pub iterations: Option<u64>,
    pub hash_bits: Option<u32>,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        self.delta.is_none() && self.iterations.is_none() && self.hash_bits.is_none()
    }
}

pub fn full_delta(c: f64, eps: f64) -> f64 {
    (c / eps + 1.0) / eps + 2.0
}

pub fn iterations_for(q: f64, message_count: usize, delta: f64, eps: f64) -> f64 {
    (2.0 / q * message_count as f64 * delta.exp2() * (1.0 / eps).ln()).ceil()
}

pub fn hash_bits_for(eps: f64) -> u32 {
    (3.0 / eps * (1.0 / eps).ln()).log2().ceil() as u32
}

/// Builds the configuration from the protocol's formulas, with T and k
/// rounded up. Overrides require `reduced`.
pub fn make_config(c: f64, eps: f64, q: f64, message_count: usize, reduced: bool, overrides: Overrides) -> Result<SamplerConfig> {
    if !(c >= 1.0 && c.is_finite()) {
        return Err(invalid(format!("c = {c}; need c >= 1")));
    }
    if !(eps > 0.0 && eps < 1.0 / 3.0) {
        return Err(invalid(format!("eps = {eps}; need 0 < eps < 1/3")));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(invalid(format!("q = {q}; need 0 < q <= 1")));
    }
    if message_count == 0 {
        return Err(invalid("message space is empty"));
    }
    if !reduced && !overrides.is_empty() {
        return Err(invalid("Δ/T/k overrides need the reduced flag"));
    }
    let delta = match overrides.delta {
        Some(d) if !(d >= 0.0 && d.is_finite()) => return Err(invalid(format!("reduced Δ = {d}; need Δ >= 0"))),
        Some(d) => d,
        None => full_delta(c, eps),
    };
    let iterations = match overrides.iterations {
        Some(0) => return Err(invalid("reduced T must be positive")),
        Some(t) => t as f64,
        None => iterations_for(q, message_count, delta, eps),
    };
    let hash_bits = match overrides.hash_bits {
        Some(k) if k > 32 => return Err(invalid(format!("reduced k = {k}; need k <= 32"))),
        Some(k) => k,
        None => hash_bits_for(eps),
    };
    Ok(SamplerConfig { c, eps, q, message_count, delta, iterations, hash_bits, reduced })
}

impl SamplerConfig {
    pub fn two_delta(&self) -> f64 {
        self.delta.exp2()
    }

    /// `(1 − 23ε/2)·2^{−k−Δ−2}`.
    pub fn nonabort_bound(&self) -> f64 {
        (1.0 - 11.5 * self.eps) * (-(self.hash_bits as f64) - self.delta - 2.0).exp2()
    }

    /// `(1 − 4ε)·2^{−k−Δ−2}`, the per-pair version.
    pub fn pair_nonabort_bound(&self) -> f64 {
        (1.0 - 4.0 * self.eps) * (-(self.hash_bits as f64) - self.delta - 2.0).exp2()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formulas_at_small_c() {
        let cfg = make_config(1.0, 0.3, 1.0, 4, false, Overrides::default()).unwrap();
        assert!((cfg.delta - (1.0 / 0.3 + 1.0) / 0.3 - 2.0).abs() < 1e-12);
        assert!((cfg.delta - 16.444_444_444_444).abs() < 1e-9);
        assert_eq!(cfg.hash_bits, 4);
        let t = 2.0 * 4.0 * cfg.delta.exp2() * (1.0f64 / 0.3).ln();
        assert_eq!(cfg.iterations, t.ceil());
    }

    #[test]
    fn overrides_need_flag() {
        let o = Overrides { delta: Some(4.0), ..Default::default() };
        assert!(make_config(1.0, 0.3, 1.0, 4, false, o).is_err());
        let cfg = make_config(1.0, 0.3, 0.5, 4, true, o).unwrap();
        assert_eq!(cfg.delta, 4.0);
        assert_eq!(cfg.iterations, (2.0 / 0.5 * 4.0 * 16.0 * (1.0f64 / 0.3).ln()).ceil());
        assert!(cfg.reduced);
    }

    #[test]
    fn range_checks() {
        let d = Overrides::default();
        assert!(make_config(0.5, 0.1, 1.0, 1, false, d).is_err());
        assert!(make_config(1.0, 1.0 / 3.0, 1.0, 1, false, d).is_err());
        assert!(make_config(1.0, 0.1, 0.0, 1, false, d).is_err());
        assert!(make_config(1.0, 0.1, 1.0, 0, false, d).is_err());
    }
}
