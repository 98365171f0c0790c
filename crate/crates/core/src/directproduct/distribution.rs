use serde::Serialize;

use super::instance::{coordinate_joint, refs, var, ProductInstance};
use crate::error::{invalid, Error, Result};
use crate::protocols::TranscriptFactorization;

/// Largest per-atom gap tolerated between the product form and the directly
/// conditioned joint.
pub const FACTORIZATION_TOL: f64 = 1e-12;

/// The product form of `X¹_j Y¹_j R¹_j M¹`, with `(r_j, m)` flattened into a
/// single message index `r·|M| + m`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoordinateFactorization {
    pub j: usize,
    pub conditioned_on: Vec<usize>,
    /// Components of `R_j` in index order (first varies slowest).
    pub r_vars: Vec<String>,
    pub r_sizes: Vec<usize>,
    pub factorization: TranscriptFactorization,
    /// `Pr[T_i = 1, i ∈ C]`; equals `q`.
    pub pr_condition: f64,
    /// Largest per-atom gap to the directly conditioned joint.
    pub max_abs_error: f64,
}

impl CoordinateFactorization {
    pub fn verified(&self) -> bool {
        self.max_abs_error <= FACTORIZATION_TOL && (self.factorization.q() - self.pr_condition).abs() <= FACTORIZATION_TOL
    }
}

/// `R_j = D_{−j} U_{−j} X_{C∪[j−1]} Y_{C∪[j−1]}` as variable names, and the
/// coordinates `C ∪ [j−1]` whose inputs it reveals.
pub(crate) fn r_components(t: usize, cond: &[usize], j: usize) -> (Vec<String>, Vec<usize>) {
    let mut known: Vec<usize> = (1..j).chain(cond.iter().copied()).collect();
    known.sort_unstable();
    known.dedup();
    let mut names: Vec<String> = Vec::new();
    names.extend((1..=t).filter(|&i| i != j).map(|i| var("D", i)));
    names.extend((1..=t).filter(|&i| i != j).map(|i| var("U", i)));
    names.extend(known.iter().map(|&i| var("X", i)));
    names.extend(known.iter().map(|&i| var("Y", i)));
    (names, known)
}

/// Builds `u_{x_j}(r, m)` and `u_{y_j}(r, m)` from a private-coin simulation:
/// given `r`, Alice fills in the `x_i` that `r` does not reveal by sampling
/// `μ(·|y_i)` (Bob symmetrically), both run the protocol, and the pairs
/// `(r, m)` outside the success event are zeroed. The result is compared atom
/// by atom with the conditioned joint.
pub fn conditioned_coordinate_factorization(inst: &ProductInstance, cond: &[usize], j: usize) -> Result<CoordinateFactorization> {
    let t = inst.t();
    inst.check_coordinates(cond)?;
    if j == 0 || j > t {
        return Err(invalid(format!("coordinate {j} outside 1..={t}")));
    }
    if cond.contains(&j) {
        return Err(invalid(format!("coordinate {j} is in the conditioning set")));
    }
    let f = inst.relation();
    let mu = inst.base_distribution();
    let tree = inst.tree();
    let (bx, by, bz) = (f.x_size(), f.y_size(), f.z_size());
    let nu = inst.u_size();
    let nm = tree.num_leaves();
    let (r_vars, known) = r_components(t, cond, j);
    let others: Vec<usize> = (1..=t).filter(|&i| i != j).collect();
    let mut r_sizes = vec![2; others.len()];
    r_sizes.extend(std::iter::repeat_n(nu, others.len()));
    r_sizes.extend(std::iter::repeat_n(bx, known.len()));
    r_sizes.extend(std::iter::repeat_n(by, known.len()));
    let r_count = r_sizes
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s))
        .filter(|&n| n.saturating_mul(nm).saturating_mul(bx * by) <= crate::protocols::MAX_FACTORIZATION_CELLS)
        .ok_or_else(|| Error::SizeCap("R_j × M is too large to factorize".into()))?;
    let msgs = r_count * nm;

    let (alice_ok, bob_ok) = tree.consistency();
    let px = mu.marginal_x();
    let py = mu.marginal_y();
    let leaf_digits: Vec<Vec<usize>> = (0..nm).map(|m| inst.output_digits(m)).collect();
    let pow = |b: usize, i: usize| b.pow((i - 1) as u32);

    let mut ux = vec![0.0; bx * msgs];
    let mut uy = vec![0.0; by * msgs];
    let mut digits = vec![0usize; r_sizes.len()];
    for r in 0..r_count {
        // First component varies slowest.
        let mut rest = r;
        for k in (0..r_sizes.len()).rev() {
            digits[k] = rest % r_sizes[k];
            rest /= r_sizes[k];
        }
        let n = others.len();
        let d = |i: usize| digits[others.iter().position(|&o| o == i).unwrap()];
        let u = |i: usize| digits[n + others.iter().position(|&o| o == i).unwrap()];
        let kx = |i: usize| digits[2 * n + known.iter().position(|&o| o == i).unwrap()];
        let ky = |i: usize| digits[2 * n + known.len() + known.iter().position(|&o| o == i).unwrap()];

        // Pr[R_j = r]; R_j is independent of X_jY_j.
        let mut pr_r = 0.5f64.powi(n as i32);
        for &i in &others {
            let w = if known.contains(&i) {
                let expected = if d(i) == 0 { kx(i) } else { ky(i) };
                if u(i) == expected {
                    mu.prob(kx(i), ky(i))
                } else {
                    0.0
                }
            } else if d(i) == 0 {
                px.get(u(i)).copied().unwrap_or(0.0)
            } else {
                py.get(u(i)).copied().unwrap_or(0.0)
            };
            pr_r *= w;
        }
        if pr_r == 0.0 {
            continue;
        }
        // Success on C is decided by (r, m) alone.
        let in_event = |m: usize| cond.iter().all(|&i| f.accepts(kx(i), ky(i), leaf_digits[m][i - 1]));

        // Alice's unrevealed coordinates: d_i = 1, x_i ~ μ(·|y_i = u_i).
        let free_x: Vec<usize> = others.iter().copied().filter(|&i| !known.contains(&i) && d(i) == 1).collect();
        let free_y: Vec<usize> = others.iter().copied().filter(|&i| !known.contains(&i) && d(i) == 0).collect();
        let cond_x: Vec<Vec<f64>> = free_x.iter().map(|&i| mu.cond_x_given_y(u(i)).expect("positive marginal")).collect();
        let cond_y: Vec<Vec<f64>> = free_y.iter().map(|&i| mu.cond_y_given_x(u(i)).expect("positive marginal")).collect();

        for xj in 0..bx {
            for fill in 0..bx.pow(free_x.len() as u32) {
                let mut w = pr_r;
                let mut xt = xj * pow(bx, j);
                let mut f_rest = fill;
                for (k, &i) in free_x.iter().enumerate() {
                    let v = f_rest % bx;
                    f_rest /= bx;
                    w *= cond_x[k][v];
                    xt += v * pow(bx, i);
                }
                if w == 0.0 {
                    continue;
                }
                for &i in &others {
                    if known.contains(&i) {
                        xt += kx(i) * pow(bx, i);
                    } else if d(i) == 0 {
                        xt += u(i) * pow(bx, i);
                    }
                }
                for m in 0..nm {
                    if alice_ok[m][xt] && in_event(m) {
                        ux[xj * msgs + r * nm + m] += w;
                    }
                }
            }
        }
        for yj in 0..by {
            for fill in 0..by.pow(free_y.len() as u32) {
                let mut w = 1.0;
                let mut yt = yj * pow(by, j);
                let mut f_rest = fill;
                for (k, &i) in free_y.iter().enumerate() {
                    let v = f_rest % by;
                    f_rest /= by;
                    w *= cond_y[k][v];
                    yt += v * pow(by, i);
                }
                if w == 0.0 {
                    continue;
                }
                for &i in &others {
                    if known.contains(&i) {
                        yt += ky(i) * pow(by, i);
                    } else if d(i) == 1 {
                        yt += u(i) * pow(by, i);
                    }
                }
                for m in 0..nm {
                    if bob_ok[m][yt] && in_event(m) {
                        uy[yj * msgs + r * nm + m] += w;
                    }
                }
            }
        }
    }
    // Sums of probabilities can overshoot 1 by an ulp.
    ux.iter_mut().chain(uy.iter_mut()).for_each(|v| *v = v.min(1.0));
    let outputs: Vec<usize> = (0..r_count).flat_map(|_| (0..nm).map(|m| leaf_digits[m][j - 1])).collect();
    let factorization = TranscriptFactorization::new(mu.clone(), ux, uy, outputs, bz).map_err(|e| match e {
        Error::NullEvent(_) => Error::NullEvent(format!("Pr[T_i = 1 for i in {cond:?}] = 0")),
        other => other,
    })?;

    let (joint, pr_condition) = coordinate_joint(inst, cond)?;
    let mut order = vec![var("X", j), var("Y", j)];
    order.extend(r_vars.iter().cloned());
    order.push("M".into());
    let direct = joint.marginal(&refs(&order))?;
    let mut max_abs_error: f64 = 0.0;
    for x in 0..bx {
        for y in 0..by {
            for msg in 0..msgs {
                let a = direct.probs()[(x * by + y) * msgs + msg];
                max_abs_error = max_abs_error.max((a - factorization.prob(x, y, msg)).abs());
            }
        }
    }
    Ok(CoordinateFactorization { j, conditioned_on: cond.to_vec(), r_vars, r_sizes, factorization, pr_condition, max_abs_error })
}
