use serde::Serialize;

use super::{check_eps, check_pair, lrec_with, RectangleBoundResult};
use crate::domain::{Distribution, Relation};
use crate::error::{invalid, Error, Result};
use crate::par::{self, Exec};

/// Brute force over `2^{|X||Y|}` boolean tables.
pub const MAX_SMOOTH_CELLS: usize = 16;
const DISTANCE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothRectangleResult {
    pub value: f64,
    pub witness_g: Relation,
    pub g_distance: f64,
    pub inner: RectangleBoundResult,
}

/// `max lrec(g, λ, z, ε)` over total boolean `g` with `Pr_λ[f ≠ g] ≤ δ`.
/// Ties resolve to the `g` whose table, read as a little-endian bitmask over
/// row-major cells, is smallest.
pub fn srec_entropy(f: &Relation, dist: &Distribution, z: usize, eps: f64, delta: f64) -> Result<SmoothRectangleResult> {
    srec_entropy_with(f, dist, z, eps, delta, Exec::Auto)
}

pub fn srec_entropy_with(f: &Relation, dist: &Distribution, z: usize, eps: f64, delta: f64, exec: Exec) -> Result<SmoothRectangleResult> {
    check_pair(f, dist, z)?;
    check_eps(eps, "eps")?;
    if !(delta >= 0.0) {
        return Err(invalid(format!("delta = {delta} must be non-negative")));
    }
    if !f.is_total_boolean() {
        return Err(invalid("srec_entropy enumerates total boolean perturbations; f must be total boolean"));
    }
    let (nx, ny) = (f.x_size(), f.y_size());
    let cells = nx * ny;
    if cells > MAX_SMOOTH_CELLS {
        return Err(Error::SizeCap(format!("{cells} cells exceeds {MAX_SMOOTH_CELLS} for the perturbation search")));
    }
    let fvals = f.function_values().expect("total function");
    let masses = dist.masses();
    let build = |bits: u64| Relation::tabulate(nx, ny, 2, |x, y| (bits >> (x * ny + y) & 1) as usize).expect("valid boolean table");
    let best = par::best_by(
        1u64 << cells,
        exec,
        |bits| {
            let dist_fg: f64 = (0..cells).filter(|&c| (bits >> c & 1) as usize != fvals[c]).map(|c| masses[c]).sum();
            if dist_fg > delta + DISTANCE_SLACK {
                return None;
            }
            let g = build(bits);
            let inner = lrec_with(&g, dist, z, eps, Exec::Sequential).ok()?;
            Some((inner.value, bits, inner))
        },
        |a, b| a.0.total_cmp(&b.0),
    );
    let (value, bits, inner) = best.expect("g = f is always within distance δ ≥ 0");
    let witness_g = build(bits);
    let g_distance = f.distance(&witness_g, dist);
    Ok(SmoothRectangleResult { value, witness_g, g_distance, inner })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::lrec;
    use crate::domain::make_family;

    #[test]
    fn zero_delta_is_lrec() {
        let (f, d) = make_family("EQ", 2).unwrap();
        for eps in [0.0, 0.1, 0.3] {
            let s = srec_entropy(&f, &d, 1, eps, 0.0).unwrap();
            assert_eq!(s.value, lrec(&f, &d, 1, eps).unwrap().value);
            assert_eq!(s.witness_g, f);
        }
    }

    #[test]
    fn and_matches_hand_enumeration() {
        let (f, d) = make_family("AND", 1).unwrap();
        let s = srec_entropy(&f, &d, 0, 0.1, 0.1).unwrap();
        // Uniform cells weigh 1/4 > δ, so only g = f is admissible.
        assert_eq!(s.witness_g, f);
        assert_eq!(s.value, lrec(&f, &d, 0, 0.1).unwrap().value);
        let s = srec_entropy(&f, &d, 0, 0.1, 0.25).unwrap();
        let mut best = f64::NEG_INFINITY;
        for bits in 0..16u64 {
            let g = Relation::tabulate(2, 2, 2, |x, y| (bits >> (2 * x + y) & 1) as usize).unwrap();
            if f.distance(&g, &d) <= 0.25 {
                best = best.max(lrec(&g, &d, 0, 0.1).unwrap().value);
            }
        }
        assert_eq!(s.value, best);
        assert!(s.g_distance <= 0.25);
    }

    #[test]
    fn rejects_relations() {
        let (f, d) = make_family("GHD", 2).unwrap();
        assert!(srec_entropy(&f, &d, 1, 0.1, 0.1).is_err());
    }
}
