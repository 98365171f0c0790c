use serde::Serialize;

use super::{check_eps, check_pair};
use crate::domain::{good_mass, mass_of, Distribution, Rectangle, Relation};
use crate::error::{Error, Result};
use crate::infotheory::relminent;
use crate::par::{self, Exec};

pub const MAX_LREC_SIDE: usize = 12;
const PURITY_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RectangleBoundResult {
    /// `−log λ(R)` of the witness, or `+∞` when no rectangle qualifies.
    pub value: f64,
    pub witness: Option<Rectangle>,
    pub witness_mass: f64,
    /// `1 − λ(g⁻¹(z) ∩ R)/λ(R)` on the witness.
    pub witness_error: f64,
    /// `S∞(λ_R‖λ)` recomputed from the renormalized restriction.
    pub witness_minentropy: f64,
}

impl RectangleBoundResult {
    pub fn qualifies(&self) -> bool {
        self.witness.is_some()
    }
}

/// Minimum of `S∞(λ_R‖λ) = −log λ(R)` over rectangles with `λ(R) > 0` and
/// `λ(g⁻¹(z) ∩ R) ≥ (1−ε)·λ(R)`.
pub fn lrec(g: &Relation, dist: &Distribution, z: usize, eps: f64) -> Result<RectangleBoundResult> {
    lrec_with(g, dist, z, eps, Exec::Auto)
}

pub fn lrec_with(g: &Relation, dist: &Distribution, z: usize, eps: f64, exec: Exec) -> Result<RectangleBoundResult> {
    check_pair(g, dist, z)?;
    check_eps(eps, "eps")?;
    let (nx, ny) = (g.x_size(), g.y_size());
    if nx > MAX_LREC_SIDE || ny > MAX_LREC_SIDE {
        return Err(Error::SizeCap(format!("lrec enumerates 2^|X|·2^|Y| rectangles; {nx}×{ny} exceeds {MAX_LREC_SIDE} per side")));
    }
    let good: Vec<f64> = (0..nx * ny).map(|c| if g.accepts(c / ny, c % ny, z) { dist.masses()[c] } else { 0.0 }).collect();
    let best = largest_pure(dist.masses(), &good, nx, ny, 1.0 - eps, exec);
    Ok(match best {
        None => RectangleBoundResult {
            value: f64::INFINITY,
            witness: None,
            witness_mass: 0.0,
            witness_error: f64::NAN,
            witness_minentropy: f64::INFINITY,
        },
        Some(rect) => describe(rect, g, dist, z),
    })
}

fn describe(rect: Rectangle, g: &Relation, dist: &Distribution, z: usize) -> RectangleBoundResult {
    let mass = mass_of(&rect, dist);
    let good = good_mass(&rect, dist, g, z);
    let ny = dist.y_size();
    let restricted: Vec<f64> =
        dist.masses().iter().enumerate().map(|(c, &p)| if rect.contains(c / ny, c % ny) { p / mass } else { 0.0 }).collect();
    let minent = relminent(&restricted, dist.masses()).map(|d| d.value()).unwrap_or(f64::INFINITY);
    RectangleBoundResult {
        // Rounding can push a full-support sum a hair above 1.
        value: (-mass.log2()).max(0.0),
        witness: Some(rect),
        witness_mass: mass,
        witness_error: 1.0 - good / mass,
        witness_minentropy: minent,
    }
}

/// Largest-mass rectangle with `good ≥ purity·mass`; ties go to the
/// lexicographically smallest `(rows, cols)`.
fn largest_pure(mass: &[f64], good: &[f64], nx: usize, ny: usize, purity: f64, exec: Exec) -> Option<Rectangle> {
    let ncols = 1usize << ny;
    let found = par::best_by(
        (1u64 << nx) - 1,
        exec,
        |i| {
            let rows = i + 1;
            let mut col_mass = vec![0.0; ny];
            let mut col_good = vec![0.0; ny];
            for x in (0..nx).filter(|x| rows >> x & 1 == 1) {
                for y in 0..ny {
                    col_mass[y] += mass[x * ny + y];
                    col_good[y] += good[x * ny + y];
                }
            }
            let mut sm = vec![0.0; ncols];
            let mut sg = vec![0.0; ncols];
            let mut best: Option<(f64, u64)> = None;
            for cols in 1..ncols {
                let low = cols.trailing_zeros() as usize;
                let rest = cols & (cols - 1);
                sm[cols] = sm[rest] + col_mass[low];
                sg[cols] = sg[rest] + col_good[low];
                let m = sm[cols];
                if m > 0.0 && sg[cols] >= purity * m - PURITY_SLACK && best.is_none_or(|(bm, _)| m > bm) {
                    best = Some((m, cols as u64));
                }
            }
            best.map(|(m, cols)| (m, Rectangle::new(rows, cols)))
        },
        |a, b| a.0.total_cmp(&b.0),
    );
    found.map(|(_, r)| r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_family;

    #[test]
    fn eq_diagonal_cells() {
        let (f, d) = make_family("EQ", 2).unwrap();
        let r = lrec(&f, &d, 1, 0.0).unwrap();
        assert_eq!(r.value, 4.0);
        assert_eq!(r.witness, Some(Rectangle::cell(0, 0)));
        assert!((r.witness_minentropy - 4.0).abs() < 1e-12);
    }

    #[test]
    fn constant_and_vacuous() {
        let g = Relation::tabulate(3, 3, 2, |_, _| 1).unwrap();
        let d = Distribution::uniform(3, 3);
        assert_eq!(lrec(&g, &d, 1, 0.0).unwrap().value, 0.0);
        let (f, d) = make_family("IP", 2).unwrap();
        let r = lrec(&f, &d, 1, 1.0).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.witness, Some(Rectangle::full(4, 4)));
    }

    #[test]
    fn no_qualifying_rectangle() {
        let g = Relation::tabulate(2, 2, 2, |_, _| 0).unwrap();
        let r = lrec(&g, &Distribution::uniform(2, 2), 1, 0.5).unwrap();
        assert!(r.value.is_infinite() && r.witness.is_none());
    }

    #[test]
    fn sequential_matches_parallel() {
        let (f, d) = make_family("DISJ", 3).unwrap();
        for eps in [0.0, 0.1, 0.3] {
            let a = lrec_with(&f, &d, 1, eps, Exec::Auto).unwrap();
            let b = lrec_with(&f, &d, 1, eps, Exec::Sequential).unwrap();
            assert_eq!(a, b);
        }
    }
}
