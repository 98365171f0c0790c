//! Two-phase dense revised simplex with an explicit basis inverse, plus a
//! dual simplex warm start for programs that grow by appended rows.

use super::{certify, LpInstance, LpRow, LpSolution, LpStatus, RowKind, Sense};
use crate::error::Result;

const PIVOT_TOL: f64 = 1e-8;
const PRICE_TOL: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-7;
const REFACTOR_EVERY: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Col {
    Structural(usize),
    /// Slack (+1) or surplus (−1) on a row.
    Logical(usize, i8),
    Artificial(usize),
}

/// `min c̃ᵀx̃, Ãx̃ = b̃ ≥ 0, x̃ ≥ 0` with rows flipped to make `b̃ ≥ 0`.
struct Standard {
    m: usize,
    sigma: f64,
    /// Column-major structural coefficients after row flips.
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    cost: Vec<f64>,
    flip: Vec<bool>,
    cols: Vec<Col>,
}

impl Standard {
    fn build(inst: &LpInstance) -> Self {
        let sigma = match inst.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut s = Standard {
            m: 0,
            sigma,
            a: vec![Vec::new(); inst.num_cols()],
            b: Vec::new(),
            cost: inst.objective.iter().map(|c| sigma * c).collect(),
            flip: Vec::new(),
            cols: (0..inst.num_cols()).map(Col::Structural).collect(),
        };
        for row in &inst.rows {
            s.push_row(row);
        }
        s
    }

    /// Appends a row and its logical columns; returns the row's kind after
    /// flipping.
    fn push_row(&mut self, row: &LpRow) -> RowKind {
        let i = self.m;
        let flip = row.rhs < 0.0;
        let sign = if flip { -1.0 } else { 1.0 };
        for (col, &c) in self.a.iter_mut().zip(&row.coeffs) {
            col.push(sign * c);
        }
        self.b.push(sign * row.rhs);
        self.flip.push(flip);
        self.m += 1;
        let kind = match (row.kind, flip) {
            (RowKind::Le, false) | (RowKind::Ge, true) => RowKind::Le,
            (RowKind::Ge, false) | (RowKind::Le, true) => RowKind::Ge,
            (RowKind::Eq, _) => RowKind::Eq,
        };
        match kind {
            RowKind::Le => self.cols.push(Col::Logical(i, 1)),
            RowKind::Ge => {
                self.cols.push(Col::Logical(i, -1));
                self.cols.push(Col::Artificial(i));
            }
            RowKind::Eq => self.cols.push(Col::Artificial(i)),
        }
        kind
    }

    /// `dot(v, column q)`.
    fn dot_col(&self, v: &[f64], q: usize) -> f64 {
        match self.cols[q] {
            Col::Structural(j) => self.a[j].iter().zip(v).map(|(x, y)| x * y).sum(),
            Col::Logical(i, s) => f64::from(s) * v[i],
            Col::Artificial(i) => v[i],
        }
    }

    fn dense_col(&self, q: usize) -> Vec<f64> {
        match self.cols[q] {
            Col::Structural(j) => self.a[j].clone(),
            Col::Logical(i, s) => {
                let mut e = vec![0.0; self.m];
                e[i] = f64::from(s);
                e
            }
            Col::Artificial(i) => {
                let mut e = vec![0.0; self.m];
                e[i] = 1.0;
                e
            }
        }
    }

    fn phase_cost(&self, q: usize, phase1: bool) -> f64 {
        match (self.cols[q], phase1) {
            (Col::Artificial(_), true) => 1.0,
            (Col::Structural(j), false) => self.cost[j],
            _ => 0.0,
        }
    }

    fn is_artificial(&self, q: usize) -> bool {
        matches!(self.cols[q], Col::Artificial(_))
    }
}

enum Outcome {
    Optimal,
    Unbounded,
    Infeasible,
    IterationLimit,
}

/// Simplex state that survives row additions.
pub(crate) struct Solver {
    s: Standard,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Vec<Vec<f64>>,
    xb: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    status: Option<LpStatus>,
}

fn identity(m: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|i| {
            let mut r = vec![0.0; m];
            r[i] = 1.0;
            r
        })
        .collect()
}

impl Solver {
    pub(crate) fn new(inst: &LpInstance) -> Self {
        let s = Standard::build(inst);
        let mut solver = Solver {
            basis: Vec::new(),
            in_basis: Vec::new(),
            binv: Vec::new(),
            xb: Vec::new(),
            iterations: 0,
            since_refactor: 0,
            status: None,
            s,
        };
        solver.reset_basis();
        solver
    }

    /// Slack/artificial starting basis.
    fn reset_basis(&mut self) {
        let m = self.s.m;
        let mut basis = vec![usize::MAX; m];
        for (q, col) in self.s.cols.iter().enumerate() {
            match *col {
                Col::Logical(i, 1) | Col::Artificial(i) if basis[i] == usize::MAX => basis[i] = q,
                _ => {}
            }
        }
        self.in_basis = vec![false; self.s.cols.len()];
        for &q in &basis {
            self.in_basis[q] = true;
        }
        self.basis = basis;
        self.binv = identity(m);
        self.xb = self.s.b.clone();
        self.since_refactor = 0;
    }

    fn max_iter(&self) -> usize {
        self.iterations + 50 * (self.s.m + self.s.cols.len()) + 1000
    }

    fn duals(&self, phase1: bool) -> Vec<f64> {
        let m = self.s.m;
        let mut y = vec![0.0; m];
        for (r, &q) in self.basis.iter().enumerate() {
            let c = self.s.phase_cost(q, phase1);
            if c != 0.0 {
                for (yi, bi) in y.iter_mut().zip(&self.binv[r]) {
                    *yi += c * bi;
                }
            }
        }
        y
    }

    fn objective(&self, phase1: bool) -> f64 {
        self.basis.iter().zip(&self.xb).map(|(&q, &x)| self.s.phase_cost(q, phase1) * x).sum()
    }

    fn ftran(&self, col: &[f64]) -> Vec<f64> {
        self.binv.iter().map(|row| row.iter().zip(col).map(|(a, b)| a * b).sum()).collect()
    }

    fn pivot(&mut self, r: usize, q: usize, w: &[f64]) {
        let m = self.s.m;
        let pr = w[r];
        let theta = self.xb[r] / pr;
        for i in 0..m {
            if i != r {
                self.xb[i] -= theta * w[i];
            }
        }
        self.xb[r] = theta;
        let row_r: Vec<f64> = self.binv[r].iter().map(|v| v / pr).collect();
        for i in 0..m {
            if i != r && w[i] != 0.0 {
                let f = w[i];
                for (dst, src) in self.binv[i].iter_mut().zip(&row_r) {
                    *dst -= f * src;
                }
            }
        }
        self.binv[r] = row_r;
        self.in_basis[self.basis[r]] = false;
        self.in_basis[q] = true;
        self.basis[r] = q;
        self.iterations += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
        }
    }

    /// Recomputes B⁻¹ and x_B from scratch by Gauss-Jordan elimination.
    fn refactor(&mut self) {
        let m = self.s.m;
        self.since_refactor = 0;
        let mut bmat: Vec<Vec<f64>> = vec![vec![0.0; m]; m];
        for (r, &q) in self.basis.iter().enumerate() {
            let col = self.s.dense_col(q);
            for i in 0..m {
                bmat[i][r] = col[i];
            }
        }
        let mut inv = identity(m);
        for c in 0..m {
            let p = (c..m).max_by(|&i, &j| bmat[i][c].abs().total_cmp(&bmat[j][c].abs()).then(j.cmp(&i))).unwrap_or(c);
            if bmat[p][c].abs() < 1e-14 {
                // Numerically singular; keep the product-form inverse.
                return;
            }
            bmat.swap(p, c);
            inv.swap(p, c);
            let d = bmat[c][c];
            for v in bmat[c].iter_mut() {
                *v /= d;
            }
            for v in inv[c].iter_mut() {
                *v /= d;
            }
            let (src_b, src_i) = (bmat[c].clone(), inv[c].clone());
            for i in 0..m {
                if i != c && bmat[i][c] != 0.0 {
                    let f = bmat[i][c];
                    for k in 0..m {
                        bmat[i][k] -= f * src_b[k];
                        inv[i][k] -= f * src_i[k];
                    }
                }
            }
        }
        self.binv = inv;
        self.xb = self.ftran(&self.s.b);
    }

    /// Primal simplex from a primal feasible basis.
    fn primal(&mut self, phase1: bool, max_iter: usize) -> Outcome {
        let ncols = self.s.cols.len();
        let stall_limit = 3 * (self.s.m + ncols);
        let mut stall = 0usize;
        let mut bland = false;
        let mut last_obj = self.objective(phase1);
        loop {
            if self.iterations >= max_iter {
                return Outcome::IterationLimit;
            }
            let y = self.duals(phase1);
            let mut entering: Option<(usize, f64)> = None;
            for q in 0..ncols {
                if self.in_basis[q] || (!phase1 && self.s.is_artificial(q)) {
                    continue;
                }
                let d = self.s.phase_cost(q, phase1) - self.s.dot_col(&y, q);
                if d < -PRICE_TOL {
                    match entering {
                        None => entering = Some((q, d)),
                        Some((_, best)) if !bland && d < best => entering = Some((q, d)),
                        _ => {}
                    }
                    if bland {
                        break;
                    }
                }
            }
            let Some((q, _)) = entering else {
                return Outcome::Optimal;
            };
            let w = self.ftran(&self.s.dense_col(q));
            let mut leave: Option<(usize, f64)> = None;
            for (r, &wr) in w.iter().enumerate() {
                if wr > PIVOT_TOL {
                    let ratio = self.xb[r].max(0.0) / wr;
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((lr, best)) => {
                            let tie = (ratio - best).abs() <= 1e-12 * best.abs().max(1.0);
                            if (!tie && ratio < best) || (tie && self.basis[r] < self.basis[lr]) {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Outcome::Unbounded;
            };
            self.xb[r] = self.xb[r].max(0.0);
            self.pivot(r, q, &w);
            let obj = self.objective(phase1);
            if obj < last_obj - 1e-12 * last_obj.abs().max(1.0) {
                stall = 0;
                last_obj = obj;
            } else {
                stall += 1;
                if stall >= stall_limit {
                    bland = true;
                }
            }
        }
    }

    /// Dual simplex from a dual feasible basis (phase-two costs).
    fn dual(&mut self, max_iter: usize) -> Outcome {
        let ncols = self.s.cols.len();
        loop {
            if self.iterations >= max_iter {
                return Outcome::IterationLimit;
            }
            let mut leave: Option<(usize, f64)> = None;
            for (r, &x) in self.xb.iter().enumerate() {
                if x < -PRIMAL_TOL && leave.is_none_or(|(_, v)| x < v) {
                    leave = Some((r, x));
                }
            }
            let Some((r, _)) = leave else {
                return Outcome::Optimal;
            };
            let y = self.duals(false);
            let rho = self.binv[r].clone();
            let mut enter: Option<(usize, f64, f64)> = None;
            for q in 0..ncols {
                if self.in_basis[q] || self.s.is_artificial(q) {
                    continue;
                }
                let alpha = self.s.dot_col(&rho, q);
                if alpha < -PIVOT_TOL {
                    let d = (self.s.phase_cost(q, false) - self.s.dot_col(&y, q)).max(0.0);
                    let ratio = d / -alpha;
                    let better = match enter {
                        None => true,
                        Some((_, br, ba)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * br.abs().max(1.0);
                            (!tie && ratio < br) || (tie && alpha.abs() > ba)
                        }
                    };
                    if better {
                        enter = Some((q, ratio, alpha.abs()));
                    }
                }
            }
            let Some((q, _, _)) = enter else {
                return Outcome::Infeasible;
            };
            let w = self.ftran(&self.s.dense_col(q));
            self.pivot(r, q, &w);
        }
    }

    /// Pivots basic artificials out where a non-artificial column can replace them.
    fn drive_out_artificials(&mut self) {
        for r in 0..self.s.m {
            if !self.s.is_artificial(self.basis[r]) {
                continue;
            }
            let rho = self.binv[r].clone();
            let found = (0..self.s.cols.len())
                .find(|&q| !self.in_basis[q] && !self.s.is_artificial(q) && self.s.dot_col(&rho, q).abs() > PIVOT_TOL);
            if let Some(q) = found {
                let w = self.ftran(&self.s.dense_col(q));
                self.pivot(r, q, &w);
            }
        }
    }

    /// Two-phase solve from the slack basis.
    pub(crate) fn solve_cold(&mut self) -> LpStatus {
        self.reset_basis();
        let max_iter = self.max_iter();
        let needs_phase1 = self.basis.iter().any(|&q| self.s.is_artificial(q));
        if needs_phase1 {
            match self.primal(true, max_iter) {
                Outcome::IterationLimit => return self.finish(LpStatus::IterationLimit),
                Outcome::Optimal => {}
                Outcome::Unbounded | Outcome::Infeasible => unreachable!("phase one is bounded and feasible"),
            }
            self.refactor();
            let scale = self.s.b.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            if self.objective(true) > PHASE1_TOL * scale {
                return self.finish(LpStatus::Infeasible);
            }
            self.drive_out_artificials();
            self.refactor();
        }
        self.phase_two(max_iter)
    }

    fn phase_two(&mut self, max_iter: usize) -> LpStatus {
        let status = match self.primal(false, max_iter) {
            Outcome::Optimal => LpStatus::Optimal,
            Outcome::Unbounded => LpStatus::Unbounded,
            Outcome::Infeasible => LpStatus::Infeasible,
            Outcome::IterationLimit => LpStatus::IterationLimit,
        };
        self.refactor();
        self.finish(status)
    }

    fn finish(&mut self, status: LpStatus) -> LpStatus {
        self.status = Some(status);
        status
    }

    /// Appends `row` and re-optimizes. From an optimal basis a `≤`/`≥` row
    /// keeps dual feasibility, so a dual simplex pass restores optimality;
    /// other situations fall back to a cold solve.
    pub(crate) fn add_row(&mut self, row: &LpRow) -> LpStatus {
        let was_optimal = self.status == Some(LpStatus::Optimal);
        let kind = self.s.push_row(row);
        let m = self.s.m;
        let i = m - 1;
        self.in_basis.resize(self.s.cols.len(), false);
        if !was_optimal || kind == RowKind::Eq {
            return self.solve_cold();
        }
        let (q_new, sign) = match kind {
            RowKind::Le => (self.s.cols.len() - 1, 1.0),
            _ => (self.s.cols.len() - 2, -1.0),
        };
        // B' = [[B, 0], [a_Bᵀ, s]]  ⇒  B'⁻¹ = [[B⁻¹, 0], [−s·a_BᵀB⁻¹, s]].
        let a_b: Vec<f64> = self
            .basis
            .iter()
            .map(|&q| match self.s.cols[q] {
                Col::Structural(j) => self.s.a[j][i],
                _ => 0.0,
            })
            .collect();
        let mut new_row = vec![0.0; m];
        for (r, &coef) in a_b.iter().enumerate() {
            if coef != 0.0 {
                for (dst, src) in new_row.iter_mut().zip(&self.binv[r]) {
                    *dst -= sign * coef * src;
                }
            }
        }
        new_row[i] = sign;
        for r in self.binv.iter_mut() {
            r.push(0.0);
        }
        self.binv.push(new_row);
        let ax: f64 = a_b.iter().zip(&self.xb).map(|(a, x)| a * x).sum();
        self.xb.push(sign * (self.s.b[i] - ax));
        self.basis.push(q_new);
        self.in_basis[q_new] = true;
        let max_iter = self.max_iter();
        match self.dual(max_iter) {
            Outcome::Optimal => self.phase_two(max_iter),
            Outcome::Infeasible => {
                self.refactor();
                self.finish(LpStatus::Infeasible)
            }
            Outcome::IterationLimit | Outcome::Unbounded => self.solve_cold(),
        }
    }

    /// Solution in terms of the original program.
    pub(crate) fn solution(&self, inst: &LpInstance) -> LpSolution {
        let status = self.status.unwrap_or(LpStatus::IterationLimit);
        if status != LpStatus::Optimal {
            return LpSolution::empty(status, self.iterations);
        }
        let mut x = vec![0.0; inst.num_cols()];
        for (r, &q) in self.basis.iter().enumerate() {
            if let Col::Structural(j) = self.s.cols[q] {
                x[j] = self.xb[r].max(0.0);
            }
        }
        let y = self
            .duals(false)
            .iter()
            .zip(&self.s.flip)
            .map(|(&v, &f)| {
                let v = self.s.sigma * if f { -v } else { v };
                if v == 0.0 {
                    0.0
                } else {
                    v
                }
            })
            .collect();
        certify(inst, status, x, y, self.iterations)
    }
}

/// Solves `inst` to optimality or reports infeasibility/unboundedness.
pub fn solve(inst: &LpInstance) -> Result<LpSolution> {
    inst.validate()?;
    let mut solver = Solver::new(inst);
    solver.solve_cold();
    Ok(solver.solution(inst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::LpRow;
    use approx::assert_abs_diff_eq;

    #[test]
    fn min_single_bound() {
        let mut lp = LpInstance::new(Sense::Minimize, vec![1.0]);
        lp.push_row(LpRow::new("r", vec![1.0], RowKind::Ge, 3.0));
        let sol = solve(&lp).unwrap();
        assert!(sol.is_certified());
        assert_abs_diff_eq!(sol.objective, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn max_box_duals() {
        let mut lp = LpInstance::new(Sense::Maximize, vec![1.0, 1.0]);
        lp.push_row(LpRow::new("a", vec![1.0, 0.0], RowKind::Le, 1.0));
        lp.push_row(LpRow::new("b", vec![0.0, 1.0], RowKind::Le, 1.0));
        let sol = solve(&lp).unwrap();
        assert!(sol.is_certified());
        assert_abs_diff_eq!(sol.objective, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.dual[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.dual[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LpInstance::new(Sense::Minimize, vec![1.0]);
        lp.push_row(LpRow::new("lo", vec![1.0], RowKind::Ge, 2.0));
        lp.push_row(LpRow::new("hi", vec![1.0], RowKind::Le, 1.0));
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);

        let mut lp = LpInstance::new(Sense::Maximize, vec![1.0, 0.0]);
        lp.push_row(LpRow::new("r", vec![1.0, -1.0], RowKind::Le, 1.0));
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_negative_rhs() {
        // min 2x + 3y  s.t.  x + y = 4,  -x ≤ -1  (x ≥ 1)
        let mut lp = LpInstance::new(Sense::Minimize, vec![2.0, 3.0]);
        lp.push_row(LpRow::new("sum", vec![1.0, 1.0], RowKind::Eq, 4.0));
        lp.push_row(LpRow::new("lb", vec![-1.0, 0.0], RowKind::Le, -1.0));
        let sol = solve(&lp).unwrap();
        assert!(sol.is_certified(), "{sol:?}");
        assert_abs_diff_eq!(sol.objective, 8.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.primal[0], 4.0, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_program_terminates() {
        // Several constraints active at the origin vertex.
        let mut lp = LpInstance::new(Sense::Maximize, vec![10.0, -57.0, -9.0, -24.0]);
        lp.push_row(LpRow::new("a", vec![0.5, -5.5, -2.5, 9.0], RowKind::Le, 0.0));
        lp.push_row(LpRow::new("b", vec![0.5, -1.5, -0.5, 1.0], RowKind::Le, 0.0));
        lp.push_row(LpRow::new("c", vec![1.0, 0.0, 0.0, 0.0], RowKind::Le, 1.0));
        let sol = solve(&lp).unwrap();
        assert!(sol.is_certified(), "{sol:?}");
        assert_abs_diff_eq!(sol.objective, 1.0, epsilon = 1e-9);
    }
}
