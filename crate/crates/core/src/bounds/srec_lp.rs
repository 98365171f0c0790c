use serde::Serialize;

use super::check_eps;
use crate::domain::{Rectangle, Relation};
use crate::error::{invalid, Error, Result};
use crate::lp::{self, LpInstance, LpRow, LpStatus, RowKind, Sense, DEFAULT_MAX_ROUNDS, FEAS_TOL};
use crate::par::{self, Exec};

/// Side length enumerated by the separation oracle.
pub const MAX_SEPARATION_SIDE: usize = 16;
const VIOLATION_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpBoundResult {
    pub z: usize,
    pub eps: f64,
    /// Optimum of the covering program `min Σ v_W`.
    pub primal_value: f64,
    pub log_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    /// Dual weights per cell, row-major; `phi` is zero off `f⁻¹(z)`.
    pub lambda: Vec<f64>,
    pub phi: Vec<f64>,
    /// Rectangles carrying positive cover weight `v_W`.
    pub cover: Vec<(Rectangle, f64)>,
    /// Largest violation of the covering constraints by `cover`.
    pub primal_infeasibility: f64,
    pub rows_generated: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Separation {
    pub rect: Rectangle,
    pub value: f64,
}

/// Per-cell layout of dual variables: `(λ index, optional φ index)`.
struct DualLayout {
    nx: usize,
    ny: usize,
    in_z: Vec<bool>,
    vars: Vec<(usize, Option<usize>)>,
    ncols: usize,
}

impl DualLayout {
    fn new(f: &Relation, z: usize) -> Result<Self> {
        let vals = f.function_values().ok_or_else(|| invalid("srec_lp requires a total function"))?;
        if z >= f.z_size() {
            return Err(invalid(format!("output {z} outside Z of size {}", f.z_size())));
        }
        let in_z: Vec<bool> = vals.iter().map(|&v| v == z).collect();
        let mut vars = Vec::with_capacity(in_z.len());
        let mut next = 0;
        for &inside in &in_z {
            if inside {
                vars.push((next, Some(next + 1)));
                next += 2;
            } else {
                vars.push((next, None));
                next += 1;
            }
        }
        Ok(DualLayout { nx: f.x_size(), ny: f.y_size(), in_z, vars, ncols: next })
    }

    /// Rectangle coefficient `λ − φ` on `f⁻¹(z)`, `−λ` elsewhere.
    fn weights(&self, point: &[f64]) -> Vec<f64> {
        self.vars
            .iter()
            .map(|&(l, p)| match p {
                Some(p) => point[l] - point[p],
                None => -point[l],
            })
            .collect()
    }

    fn row(&self, rect: Rectangle) -> LpRow {
        let mut coeffs = vec![0.0; self.ncols];
        for x in rect.row_indices() {
            for y in rect.col_indices() {
                let (l, p) = self.vars[x * self.ny + y];
                match p {
                    Some(p) => {
                        coeffs[l] = 1.0;
                        coeffs[p] = -1.0;
                    }
                    None => coeffs[l] = -1.0,
                }
            }
        }
        LpRow::new(format!("W_{:x}_{:x}", rect.rows, rect.cols), coeffs, RowKind::Le, 1.0)
    }

    fn master(&self, eps: f64) -> LpInstance {
        let mut obj = vec![0.0; self.ncols];
        let mut names = vec![String::new(); self.ncols];
        for (c, &(l, p)) in self.vars.iter().enumerate() {
            match p {
                Some(p) => {
                    obj[l] = 1.0 - eps;
                    obj[p] = -1.0;
                    names[l] = format!("lambda_{c}");
                    names[p] = format!("phi_{c}");
                }
                None => {
                    obj[l] = -eps;
                    names[l] = format!("lambda_{c}");
                }
            }
        }
        let mut lp = LpInstance::new(Sense::Maximize, obj).with_col_names(names);
        for x in 0..self.nx {
            for y in 0..self.ny {
                lp.push_row(self.row(Rectangle::cell(x, y)));
            }
        }
        lp
    }
}

/// Most violated rectangle constraint of the dual at `weights` (one entry per
/// cell, row-major), or `None` when every rectangle sums to at most `1 + 1e-8`.
pub fn rectangle_separation(weights: &[f64], nx: usize, ny: usize, exec: Exec) -> Result<Option<Separation>> {
    if weights.len() != nx * ny {
        return Err(Error::DimensionMismatch(format!("{} weights for {nx}×{ny} cells", weights.len())));
    }
    let transpose = ny < nx;
    let (small, large) = if transpose { (ny, nx) } else { (nx, ny) };
    if small > MAX_SEPARATION_SIDE || large > 64 {
        return Err(Error::SizeCap(format!("separation enumerates 2^{small} subsets; cap is {MAX_SEPARATION_SIDE}")));
    }
    let w = |s: usize, l: usize| if transpose { weights[l * ny + s] } else { weights[s * ny + l] };
    let best = par::best_by(
        (1u64 << small) - 1,
        exec,
        |i| {
            let subset = i + 1;
            let mut total = 0.0;
            let mut lines = 0u64;
            for l in 0..large {
                let contrib: f64 = (0..small).filter(|s| subset >> s & 1 == 1).map(|s| w(s, l)).sum();
                if contrib > 0.0 {
                    total += contrib;
                    lines |= 1 << l;
                }
            }
            if lines == 0 {
                return None;
            }
            let rect = if transpose { Rectangle::new(lines, subset) } else { Rectangle::new(subset, lines) };
            Some(Separation { rect, value: total })
        },
        |a, b| a.value.total_cmp(&b.value).then(b.rect.cmp(&a.rect)),
    );
    Ok(best.filter(|s| s.value > 1.0 + VIOLATION_TOL))
}

/// Oracle for [`rectangle_separation`]: every nonempty rectangle, same tie rule.
pub fn separation_brute_force(weights: &[f64], nx: usize, ny: usize) -> Option<Separation> {
    let mut best: Option<Separation> = None;
    for rows in 1..1u64 << nx {
        for cols in 1..1u64 << ny {
            let rect = Rectangle::new(rows, cols);
            let mut value = 0.0;
            for x in rect.row_indices() {
                for y in rect.col_indices() {
                    value += weights[x * ny + y];
                }
            }
            if best.as_ref().is_none_or(|b| value > b.value) {
                best = Some(Separation { rect, value });
            }
        }
    }
    best.filter(|s| s.value > 1.0 + VIOLATION_TOL)
}

/// Optimum of the covering program for output `z`, solved through its dual
/// with rectangle rows generated on demand. The primal cover is read off the
/// row multipliers of the final master.
pub fn srec_lp(f: &Relation, z: usize, eps: f64) -> Result<LpBoundResult> {
    srec_lp_with(f, z, eps, Exec::Auto)
}

pub fn srec_lp_with(f: &Relation, z: usize, eps: f64, exec: Exec) -> Result<LpBoundResult> {
    check_eps(eps, "eps")?;
    if eps >= 1.0 {
        return Err(invalid("eps must be below 1"));
    }
    let layout = DualLayout::new(f, z)?;
    if layout.nx.min(layout.ny) > MAX_SEPARATION_SIDE {
        return Err(Error::SizeCap(format!("min(|X|,|Y|) exceeds {MAX_SEPARATION_SIDE}")));
    }
    let master = layout.master(eps);
    let out = lp::solve_with_row_generation(
        master,
        |point| {
            let sep = rectangle_separation(&layout.weights(point), layout.nx, layout.ny, exec)?;
            Ok(sep.map(|s| layout.row(s.rect)))
        },
        DEFAULT_MAX_ROUNDS,
    )?;
    let sol = &out.solution;
    if sol.status != LpStatus::Optimal {
        // The all-singletons cover is primal feasible, so the dual is bounded
        // and feasible at zero; anything else is a solver failure.
        return Err(Error::Lp(format!("srec dual ended with status {:?}", sol.status)));
    }
    let mut cover = Vec::new();
    for (row, &v) in out.master.rows.iter().zip(&sol.dual) {
        if v > 0.0 {
            cover.push((parse_rect(&row.name), v));
        }
    }
    cover.sort_by_key(|a| a.0);
    let primal_value: f64 = cover.iter().map(|c| c.1).sum();
    let mut lambda = vec![0.0; layout.vars.len()];
    let mut phi = vec![0.0; layout.vars.len()];
    for (c, &(l, p)) in layout.vars.iter().enumerate() {
        lambda[c] = sol.primal[l];
        if let Some(p) = p {
            phi[c] = sol.primal[p];
        }
    }
    let primal_infeasibility = cover_violation(&layout, &cover, eps);
    Ok(LpBoundResult {
        z,
        eps,
        primal_value,
        log_value: primal_value.log2(),
        dual_value: sol.objective,
        gap: primal_value - sol.objective,
        lambda,
        phi,
        cover,
        primal_infeasibility,
        rows_generated: out.rows_added,
    })
}

fn parse_rect(name: &str) -> Rectangle {
    let mut parts = name.trim_start_matches("W_").split('_');
    let rows = u64::from_str_radix(parts.next().unwrap_or("0"), 16).unwrap_or(0);
    let cols = u64::from_str_radix(parts.next().unwrap_or("0"), 16).unwrap_or(0);
    Rectangle::new(rows, cols)
}

fn cover_violation(layout: &DualLayout, cover: &[(Rectangle, f64)], eps: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for x in 0..layout.nx {
        for y in 0..layout.ny {
            let s: f64 = cover.iter().filter(|(r, _)| r.contains(x, y)).map(|c| c.1).sum();
            if layout.in_z[x * layout.ny + y] {
                worst = worst.max(1.0 - eps - s).max(s - 1.0);
            } else {
                worst = worst.max(s - eps);
            }
        }
    }
    worst
}

/// The covering program with every nonempty rectangle as a column, solved
/// directly. Used as an oracle for [`srec_lp`] on small instances.
pub fn srec_lp_full_enumeration(f: &Relation, z: usize, eps: f64) -> Result<(f64, f64)> {
    check_eps(eps, "eps")?;
    let layout = DualLayout::new(f, z)?;
    let (nx, ny) = (layout.nx, layout.ny);
    if nx > 8 || ny > 8 {
        return Err(Error::SizeCap("full enumeration is limited to 8×8".into()));
    }
    let rects: Vec<Rectangle> = (1..1u64 << nx).flat_map(|r| (1..1u64 << ny).map(move |c| Rectangle::new(r, c))).collect();
    let mut lp = LpInstance::new(Sense::Minimize, vec![1.0; rects.len()]);
    for x in 0..nx {
        for y in 0..ny {
            let coeffs: Vec<f64> = rects.iter().map(|r| if r.contains(x, y) { 1.0 } else { 0.0 }).collect();
            if layout.in_z[x * ny + y] {
                lp.push_row(LpRow::new(format!("lo_{x}_{y}"), coeffs.clone(), RowKind::Ge, 1.0 - eps));
                lp.push_row(LpRow::new(format!("hi_{x}_{y}"), coeffs, RowKind::Le, 1.0));
            } else {
                lp.push_row(LpRow::new(format!("off_{x}_{y}"), coeffs, RowKind::Le, eps));
            }
        }
    }
    let sol = lp::solve(&lp)?;
    if !sol.is_optimal() || sol.primal_infeasibility > FEAS_TOL {
        return Err(Error::Lp(format!("full covering program ended with status {:?}", sol.status)));
    }
    Ok((sol.objective, sol.dual_objective))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_family;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_point_and_single_cell() {
        assert!(rectangle_separation(&[0.0; 16], 4, 4, Exec::Auto).unwrap().is_none());
        let mut w = vec![0.0; 16];
        w[5] = 2.0;
        let s = rectangle_separation(&w, 4, 4, Exec::Auto).unwrap().unwrap();
        assert_eq!(s.rect, Rectangle::cell(1, 1));
        assert_eq!(s.value, 2.0);
    }

    #[test]
    fn separation_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let (nx, ny) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
            let w: Vec<f64> = (0..nx * ny).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let fast = rectangle_separation(&w, nx, ny, Exec::Sequential).unwrap();
            let slow = separation_brute_force(&w, nx, ny);
            match (fast, slow) {
                (None, None) => {}
                (Some(a), Some(b)) => assert!((a.value - b.value).abs() < 1e-12, "{a:?} vs {b:?}"),
                (a, b) => panic!("{a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn constant_function_needs_one_rectangle() {
        let f = Relation::tabulate(3, 3, 2, |_, _| 1).unwrap();
        let r = srec_lp(&f, 1, 0.2).unwrap();
        assert!(r.primal_value <= 1.0 + 1e-9 && r.primal_value >= 0.8 - 1e-9);
    }

    #[test]
    fn and_matches_full_enumeration() {
        let (f, _) = make_family("AND", 1).unwrap();
        let r = srec_lp(&f, 1, 0.1).unwrap();
        let (full, full_dual) = srec_lp_full_enumeration(&f, 1, 0.1).unwrap();
        assert!((r.primal_value - full).abs() < 1e-6);
        assert!((full - full_dual).abs() < 1e-6);
        assert!(r.gap.abs() < 1e-6 && r.primal_infeasibility < 1e-7);
    }
}
