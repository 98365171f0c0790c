//! Conditioned single-coordinate protocols drawn from small product
//! protocols: for each product, each conditioning set `C` with
//! `Pr[T^(C)] > 2^(−δ₁t)` and the coordinate the averaging argument picks,
//! the factorization of coordinate `j` given `T^(C)`.

use rectbound::directproduct::{
    check_goodcoordinate, conditioned_coordinate_factorization, delta1_for, success_variables, ProductInstance,
};
use rectbound::domain::make_family;
use rectbound::protocols::{ProtocolTree, TranscriptFactorization};

use super::trial_rng;
use crate::error::{CliError, CliResult};

pub struct ConditionedInstance {
    pub label: String,
    pub factorization: TranscriptFactorization,
    /// `16δ₁(c+1)` with `c` pinned by the protocol's cost.
    pub c_theorem: f64,
    /// The measured information of the factorization.
    pub c_measured: f64,
}

pub const PIPELINE_BASES: [&str; 2] = ["AND", "EQ"];
const RANDOM_TREES: u64 = 2;

fn products(base: &str, t: usize, seed: u64) -> CliResult<Vec<(String, ProductInstance)>> {
    let (f, mu) = make_family(base, 1)?;
    let tree = ProtocolTree::send_then_answer(&f)?;
    let mut out = vec![(format!("{base} t={t} independent"), ProductInstance::independent(f.clone(), mu.clone(), t, &tree)?)];
    for fraction in [0.0, 0.5, 1.0] {
        let inst = ProductInstance::shared_budget(f.clone(), mu.clone(), t, &tree, fraction)?;
        out.push((format!("{base} t={t} shared-budget {fraction}"), inst));
    }
    let (nx, ny, nz) = (f.x_size().pow(t as u32), f.y_size().pow(t as u32), f.z_size().pow(t as u32));
    for k in 0..RANDOM_TREES {
        let mut rng = trial_rng(seed, 0x100 + t as u64, k);
        let tree = ProtocolTree::random(nx, ny, nz, 2 * t, &mut rng)?;
        out.push((format!("{base} t={t} random#{k}"), ProductInstance::new(f.clone(), mu.clone(), t, tree)?));
    }
    Ok(out)
}

fn subsets(t: usize) -> Vec<Vec<usize>> {
    // Proper subsets of 1..=t, so a free coordinate remains.
    (0u32..(1 << t) - 1).map(|mask| (1..=t).filter(|i| mask >> (i - 1) & 1 == 1).collect()).collect()
}

/// Builds every conditioned instance for bases AND and EQ on one bit,
/// `t ∈ {1, 2}` and `δ₁ = ε²/32`.
pub fn conditioned_instances(eps: f64, seed: u64) -> CliResult<Vec<ConditionedInstance>> {
    let delta1 = delta1_for(eps);
    let mut out = Vec::new();
    for base in PIPELINE_BASES {
        for t in 1..=2 {
            for (name, inst) in products(base, t, seed)? {
                let s = success_variables(&inst)?;
                for cond in subsets(t) {
                    let pr = s.pr_success(&cond)?;
                    if !(pr > (-delta1 * t as f64).exp2()) {
                        continue;
                    }
                    let c_proto = inst.tree().cost() as f64 / (delta1 * t as f64);
                    let rep = check_goodcoordinate(&inst, &cond, delta1, c_proto)?;
                    let j = rep.j.ok_or_else(|| CliError::Internal(format!("{name}: no good coordinate given {cond:?}")))?;
                    let fac = conditioned_coordinate_factorization(&inst, &cond, j)?;
                    if !fac.verified() {
                        return Err(CliError::Internal(format!("{name}: factorization mismatch {}", fac.max_abs_error)));
                    }
                    let bounds = rep.coordinates.iter().find(|b| b.i == j).expect("j is a free coordinate");
                    out.push(ConditionedInstance {
                        label: format!("{name} C={cond:?} j={j}"),
                        factorization: fac.factorization,
                        c_theorem: (16.0 * delta1 * (c_proto + 1.0)).max(1.0),
                        c_measured: bounds.info_mr.max(1.0),
                    });
                }
            }
        }
    }
    Ok(out)
}
