use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::infotheory::l1_distance;

const SLACK: f64 = 1e-9;

/// Outcome of the rejection-closeness check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistcloseCheck {
    /// `ℓ1(AB, A′B′)`.
    pub l1: f64,
    /// `C = Σ h(a)·g_a(b)`.
    pub normalizer: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// `Pr_{a←A}[Pr_{b←B_a}[f_a(b) = g_a(b)] ≥ 1 − δ₁]`.
    pub good_a_mass: f64,
    pub l1_pass: bool,
    /// `C ≥ 1 − δ₁ − δ₂`.
    pub normalizer_pass: bool,
}

impl DistcloseCheck {
    pub fn pass(&self) -> bool {
        self.l1_pass && self.normalizer_pass
    }
}

/// `AB ~ h(a)·f_a(b)` and `A′B′ ~ h(a)·g_a(b)/C` with `g ≤ f`. Checks the
/// hypotheses numerically, then evaluates `ℓ1(AB, A′B′) ≤ δ₁ + δ₂` and
/// `C ≥ 1 − δ₁ − δ₂` exactly.
pub fn check_distclose(h: &[f64], f: &[Vec<f64>], g: &[Vec<f64>], delta1: f64, delta2: f64) -> Result<DistcloseCheck> {
    if h.len() != f.len() || h.len() != g.len() {
        return Err(Error::DimensionMismatch("h, f and g must cover the same A".into()));
    }
    if f.iter().zip(g).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::DimensionMismatch("f_a and g_a differ in length".into()));
    }
    for (name, d) in [("delta1", delta1), ("delta2", delta2)] {
        if !(0.0..1.0).contains(&d) {
            return Err(invalid(format!("{name} = {d}; need [0, 1)")));
        }
    }
    let mut violations = Vec::new();
    if h.iter().chain(f.iter().flatten()).chain(g.iter().flatten()).any(|&v| !(v >= 0.0) || !v.is_finite()) {
        violations.push("h, f, g must be finite and non-negative".to_string());
    }
    let total: f64 = h.iter().zip(f).map(|(ha, fa)| ha * fa.iter().sum::<f64>()).sum();
    if (total - 1.0).abs() > SLACK {
        violations.push(format!("condition 1: Σ h·f = {total}, not 1"));
    }
    if f.iter().flatten().zip(g.iter().flatten()).any(|(a, b)| b > a) {
        violations.push("condition 2: some g_a(b) > f_a(b)".to_string());
    }
    let normalizer: f64 = h.iter().zip(g).map(|(ha, ga)| ha * ga.iter().sum::<f64>()).sum();
    if !(normalizer > 0.0) {
        violations.push("condition 3: C = 0".to_string());
    }
    let mut good_a_mass = 0.0;
    for ((&ha, fa), ga) in h.iter().zip(f).zip(g) {
        let row: f64 = fa.iter().sum();
        if ha * row == 0.0 {
            continue;
        }
        let equal: f64 = fa.iter().zip(ga).filter(|(a, b)| a == b).map(|(a, _)| a).sum();
        if equal / row >= 1.0 - delta1 - SLACK {
            good_a_mass += ha * row;
        }
    }
    if good_a_mass < 1.0 - delta2 - SLACK {
        violations.push(format!("condition 4: good mass {good_a_mass} < 1 - delta2"));
    }
    if !violations.is_empty() {
        return Err(Error::Precondition(violations.join("; ")));
    }
    let ab: Vec<f64> = h.iter().zip(f).flat_map(|(&ha, fa)| fa.iter().map(move |v| ha * v)).collect();
    let ab2: Vec<f64> = h.iter().zip(g).flat_map(|(&ha, ga)| ga.iter().map(move |v| ha * v / normalizer)).collect();
    let l1 = l1_distance(&ab, &ab2)?;
    let bound = delta1 + delta2;
    Ok(DistcloseCheck {
        l1,
        normalizer,
        delta1,
        delta2,
        good_a_mass,
        l1_pass: l1 <= bound + SLACK,
        normalizer_pass: normalizer >= 1.0 - bound - SLACK,
    })
}

/// `(h, f, g, δ₁, δ₂)` in the order [`check_distclose`] takes them.
pub type DistcloseInstance = (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>, f64, f64);

/// A random instance meeting all four hypotheses: `g` shaves a random subset
/// of cells, `δ₁` is drawn and `δ₂` sits just above the smallest value
/// condition 4 allows. Draws that would need `δ₂ ≥ 1` or give `C = 0` are
/// redrawn.
pub fn random_distclose_instance<R: Rng + ?Sized>(rng: &mut R) -> DistcloseInstance {
    loop {
        let na = rng.gen_range(1..=6);
        let nb = rng.gen_range(1..=6);
        let mut h: Vec<f64> = (0..na).map(|_| rng.gen_range(0.0..1.0)).collect();
        let f: Vec<Vec<f64>> = (0..na).map(|_| (0..nb).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let total: f64 = h.iter().zip(&f).map(|(ha, fa)| ha * fa.iter().sum::<f64>()).sum();
        h.iter_mut().for_each(|v| *v /= total);
        let shave = rng.gen_range(0.0..0.5);
        let g: Vec<Vec<f64>> =
            f.iter().map(|fa| fa.iter().map(|&v| if rng.gen_bool(shave) { v * rng.gen_range(0.0..1.0) } else { v }).collect()).collect();
        let delta1 = rng.gen_range(0.0..0.9);
        let mut bad = 0.0;
        for ((&ha, fa), ga) in h.iter().zip(&f).zip(&g) {
            let row: f64 = fa.iter().sum();
            let equal: f64 = fa.iter().zip(ga).filter(|(a, b)| a == b).map(|(a, _)| a).sum();
            if row > 0.0 && equal / row < 1.0 - delta1 {
                bad += ha * row;
            }
        }
        let delta2 = bad + rng.gen_range(0.0..0.05);
        if delta2 < 1.0 && g.iter().flatten().any(|&v| v > 0.0) {
            return (h, f, g, delta1, delta2);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equal_tables_are_at_distance_zero() {
        let h = vec![0.5, 0.5];
        let f = vec![vec![0.4, 0.6], vec![1.0, 0.0]];
        let r = check_distclose(&h, &f, &f, 0.0, 0.0).unwrap();
        assert_eq!(r.l1, 0.0);
        assert!(r.pass());
    }

    #[test]
    fn zero_deltas_force_equality() {
        let h = vec![1.0];
        let f = vec![vec![0.5, 0.5]];
        let g = vec![vec![0.5, 0.25]];
        assert!(matches!(check_distclose(&h, &f, &g, 0.0, 0.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn random_instances_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let (h, f, g, d1, d2) = random_distclose_instance(&mut rng);
            let r = check_distclose(&h, &f, &g, d1, d2).unwrap();
            assert!(r.pass(), "{r:?}");
        }
    }
}
