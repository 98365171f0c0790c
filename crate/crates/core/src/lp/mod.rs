//! A dense linear-program solver with dual certificates, plus a row
//! generation driver for programs with an implicit constraint family.

mod rowgen;
mod simplex;

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

pub use rowgen::{solve_with_row_generation, RowGenOutcome, DEFAULT_MAX_ROUNDS};
pub use simplex::solve;

pub const MAX_ROWS: usize = 5000;
pub const MAX_COLS: usize = 200_000;
/// Feasibility tolerance used by solution certificates.
pub const FEAS_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

impl RowKind {
    fn symbol(self) -> &'static str {
        match self {
            RowKind::Le => "<=",
            RowKind::Ge => ">=",
            RowKind::Eq => "=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpRow {
    pub name: String,
    pub coeffs: Vec<f64>,
    pub kind: RowKind,
    pub rhs: f64,
}

impl LpRow {
    pub fn new(name: impl Into<String>, coeffs: Vec<f64>, kind: RowKind, rhs: f64) -> Self {
        LpRow { name: name.into(), coeffs, kind, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.kind {
            RowKind::Le => (lhs - self.rhs).max(0.0),
            RowKind::Ge => (self.rhs - lhs).max(0.0),
            RowKind::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `optimize cᵀx subject to rows, x ≥ 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpInstance {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub col_names: Vec<String>,
    pub rows: Vec<LpRow>,
}

impl LpInstance {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let col_names = (0..objective.len()).map(|j| format!("x{j}")).collect();
        LpInstance { sense, objective, col_names, rows: Vec::new() }
    }

    pub fn with_col_names(mut self, names: Vec<String>) -> Self {
        self.col_names = names;
        self
    }

    pub fn push_row(&mut self, row: LpRow) {
        self.rows.push(row);
    }

    pub fn num_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_cols();
        if n == 0 {
            return Err(Error::Lp("program has no columns".into()));
        }
        if self.rows.len() > MAX_ROWS || n > MAX_COLS {
            return Err(Error::SizeCap(format!("{} rows × {n} columns exceeds {MAX_ROWS} × {MAX_COLS}", self.rows.len())));
        }
        if self.col_names.len() != n {
            return Err(Error::DimensionMismatch(format!("{} column names for {n} columns", self.col_names.len())));
        }
        for row in &self.rows {
            if row.coeffs.len() != n {
                return Err(Error::DimensionMismatch(format!("row {} has {} coefficients, expected {n}", row.name, row.coeffs.len())));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::Lp(format!("row {} has non-finite data", row.name)));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::Lp("non-finite objective".into()));
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Plain-text dump, one line per objective/row, numbers in shortest
    /// round-trip decimal form.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let sense = match self.sense {
            Sense::Minimize => "min",
            Sense::Maximize => "max",
        };
        let _ = writeln!(out, "{sense} {}", join(&self.objective));
        let _ = writeln!(out, "cols {}", self.col_names.join(" "));
        for row in &self.rows {
            let _ = writeln!(out, "row {} {} {} {}", row.name, join(&row.coeffs), row.kind.symbol(), row.rhs);
        }
        out
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|c| format!("{c:?}")).collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    /// One multiplier per row. For minimization `≥` rows carry non-negative
    /// duals; for maximization `≤` rows do.
    pub dual: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    /// `objective − dual_objective`.
    pub gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub(crate) fn empty(status: LpStatus, iterations: usize) -> Self {
        LpSolution {
            status,
            primal: Vec::new(),
            dual: Vec::new(),
            objective: f64::NAN,
            dual_objective: f64::NAN,
            gap: f64::NAN,
            primal_infeasibility: f64::NAN,
            dual_infeasibility: f64::NAN,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Optimal, primal and dual feasible within [`FEAS_TOL`], and a duality
    /// gap of at most `1e-6·max(1, |objective|)`.
    pub fn is_certified(&self) -> bool {
        self.is_optimal()
            && self.primal_infeasibility <= FEAS_TOL
            && self.dual_infeasibility <= FEAS_TOL
            && self.gap.abs() <= 1e-6 * self.objective.abs().max(1.0)
    }
}

/// Fills in objective values and feasibility measures from `x` and `y`.
pub(crate) fn certify(inst: &LpInstance, status: LpStatus, primal: Vec<f64>, dual: Vec<f64>, iterations: usize) -> LpSolution {
    let objective = inst.objective_value(&primal);
    let dual_objective: f64 = inst.rows.iter().zip(&dual).map(|(r, y)| r.rhs * y).sum();
    let mut primal_inf = primal.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
    for row in &inst.rows {
        primal_inf = primal_inf.max(row.violation(&primal));
    }
    // Dual feasibility: sign conditions on y and on reduced costs c − Aᵀy.
    let sign = match inst.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut dual_inf: f64 = 0.0;
    for (row, &y) in inst.rows.iter().zip(&dual) {
        let v = match row.kind {
            RowKind::Ge => (-sign * y).max(0.0),
            RowKind::Le => (sign * y).max(0.0),
            RowKind::Eq => 0.0,
        };
        dual_inf = dual_inf.max(v);
    }
    for j in 0..inst.num_cols() {
        let aty: f64 = inst.rows.iter().zip(&dual).map(|(r, y)| r.coeffs[j] * y).sum();
        let reduced = inst.objective[j] - aty;
        dual_inf = dual_inf.max((-sign * reduced).max(0.0));
    }
    LpSolution {
        status,
        primal,
        dual,
        objective,
        dual_objective,
        gap: objective - dual_objective,
        primal_infeasibility: primal_inf,
        dual_infeasibility: dual_inf,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_is_line_per_row() {
        let mut lp = LpInstance::new(Sense::Minimize, vec![1.0, 0.5]);
        lp.push_row(LpRow::new("c0", vec![1.0, 1.0], RowKind::Ge, 3.0));
        let text = lp.dump();
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("row c0 1.0 1.0 >= 3"));
    }

    #[test]
    fn validation_catches_ragged_rows() {
        let mut lp = LpInstance::new(Sense::Minimize, vec![1.0, 0.5]);
        lp.push_row(LpRow::new("bad", vec![1.0], RowKind::Ge, 3.0));
        assert!(matches!(lp.validate(), Err(Error::DimensionMismatch(_))));
    }
}
