use super::simplex::Solver;
use super::{LpInstance, LpRow, LpSolution};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_ROUNDS: usize = 20_000;

#[derive(Clone, Debug)]
pub struct RowGenOutcome {
    pub solution: LpSolution,
    /// The master program including every generated row.
    pub master: LpInstance,
    pub rows_added: usize,
}

/// Repeatedly solves `master`, asking `separate` for a row violated by the
/// current primal point, until none is returned.
///
/// Non-optimal statuses from the master are returned as-is. A separation
/// that re-proposes an existing row, or more than `max_rounds` rounds,
/// is reported as an error carrying the offending row.
pub fn solve_with_row_generation<F>(mut master: LpInstance, mut separate: F, max_rounds: usize) -> Result<RowGenOutcome>
where
    F: FnMut(&[f64]) -> Result<Option<LpRow>>,
{
    master.validate()?;
    let mut solver = Solver::new(&master);
    solver.solve_cold();
    let mut rows_added = 0;
    loop {
        let solution = solver.solution(&master);
        if !solution.is_optimal() {
            return Ok(RowGenOutcome { solution, master, rows_added });
        }
        let Some(row) = separate(&solution.primal)? else {
            return Ok(RowGenOutcome { solution, master, rows_added });
        };
        if rows_added >= max_rounds {
            return Err(Error::Lp(format!(
                "row generation exceeded {max_rounds} rounds; still violated: {} (violation {:e})",
                row.name,
                row.violation(&solution.primal)
            )));
        }
        if master.rows.iter().any(|r| r.coeffs == row.coeffs && r.kind == row.kind && r.rhs == row.rhs) {
            return Err(Error::Lp(format!(
                "separation returned row {} already in the master (violation {:e})",
                row.name,
                row.violation(&solution.primal)
            )));
        }
        master.push_row(row);
        master.validate()?;
        solver.add_row(master.rows.last().expect("row just pushed"));
        rows_added += 1;
    }
}
