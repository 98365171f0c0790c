use serde::Serialize;

use super::{lrec, LpBoundResult, RectangleBoundResult};
use crate::domain::{Distribution, Relation};
use crate::error::{invalid, Error, Result};

/// Dual weights at or below this are treated as zero.
const ZERO: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EqvExtraction {
    pub mu: Distribution,
    pub g: Relation,
    pub beta: f64,
    pub delta: f64,
    /// `(1+ε²)·δ/β`, the purity slack at which `g` is tested.
    pub test_eps: f64,
    /// `log(srec_lp) + 3·log ε`.
    pub claimed_lower_bound: f64,
    pub lrec: RectangleBoundResult,
    pub pass: bool,
    /// Normalizer `r = Σ μ′`.
    pub normalizer: f64,
    pub u1: Vec<usize>,
    pub u2: Vec<usize>,
    pub u0: Vec<usize>,
}

/// Turns an optimal dual of the covering program into a hard distribution
/// `μ` and a perturbation `g` of `f`, then checks the resulting rectangle
/// bound by enumeration.
pub fn lemma_eqv_extract(f: &Relation, z: usize, eps: f64, lp: &LpBoundResult) -> Result<EqvExtraction> {
    let vals = f.function_values().ok_or_else(|| invalid("extraction requires a total function"))?;
    if f.z_size() < 2 {
        return Err(invalid("extraction needs an output other than z"));
    }
    if lp.z != z || lp.eps != eps || lp.lambda.len() != vals.len() {
        return Err(Error::DimensionMismatch("dual solution does not belong to this (f, z, ε)".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid("eps must lie in (0, 1)"));
    }
    let other = if z == 0 { 1 } else { 0 };
    let cells = vals.len();
    let mut weight = vec![0.0; cells];
    let (mut u1, mut u2, mut u0) = (Vec::new(), Vec::new(), Vec::new());
    let mut g_vals = vals.clone();
    for c in 0..cells {
        let (l, p) = (lp.lambda[c], lp.phi[c]);
        if vals[c] == z {
            if l - p > ZERO {
                u1.push(c);
                weight[c] = l - p;
                g_vals[c] = z;
            } else if p - l > ZERO {
                u2.push(c);
                weight[c] = eps * (p - l);
                g_vals[c] = other;
            }
        } else if l > ZERO {
            u0.push(c);
            weight[c] = eps * l;
        }
    }
    let normalizer: f64 = weight.iter().sum();
    if normalizer <= 0.0 {
        return Err(Error::Extraction("dual weights are all zero; no distribution to extract".into()));
    }
    let mu = Distribution::from_weights(f.x_size(), f.y_size(), weight)?;
    let g = Relation::from_function(f.x_size(), f.y_size(), f.z_size(), &g_vals)?;
    let beta: f64 = u1.iter().chain(&u2).map(|&c| mu.masses()[c]).sum();
    let delta: f64 = u2.iter().map(|&c| mu.masses()[c]).sum();
    if beta <= 0.0 {
        return Err(Error::Extraction("extracted β is zero".into()));
    }
    let test_eps = (1.0 + eps * eps) * delta / beta;
    let claimed_lower_bound = lp.primal_value.log2() + 3.0 * eps.log2();
    // Slack above 1 makes the purity condition vacuous, same as 1.
    let lrec = lrec(&g, &mu, z, test_eps.min(1.0))?;
    let pass = lrec.value >= claimed_lower_bound - 1e-9;
    Ok(EqvExtraction { mu, g, beta, delta, test_eps, claimed_lower_bound, lrec, pass, normalizer, u1, u2, u0 })
}
