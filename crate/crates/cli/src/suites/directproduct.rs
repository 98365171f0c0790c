use rectbound::directproduct::{check_goodcoordinate, delta1_for, success_variables, ProductInstance};
use rectbound::protocols::ProtocolTree;

use super::{family, label, trial_rng, Item, SuiteParams, Tally};
use crate::error::CliResult;

const SUITE: &str = "goodcoordinate";
const T: usize = 2;
const RANDOM_TREES: u64 = 3;

/// `t = 2` products of 2×2 bases under every conditioning set with
/// positive success probability. `δ₁` is `ε²/32` raised just enough for
/// `Pr[T^(C)] > 2^(−δ₁t)`, and `c` is the protocol's cost over `δ₁t`.
pub fn goodcoordinate(p: &SuiteParams) -> CliResult<Vec<Item>> {
    let eps = p.eps.unwrap_or(0.3);
    let mut items = Vec::new();
    for (name, n) in p.families_or(&[("AND", 1), ("EQ", 1), ("XOR", 1)]) {
        let (f, mu) = family(&name, n)?;
        let base = ProtocolTree::send_then_answer(&f)?;
        let mut products = vec![("independent".to_string(), ProductInstance::independent(f.clone(), mu.clone(), T, &base)?)];
        for fraction in [0.0, 0.5, 1.0] {
            products
                .push((format!("shared-budget {fraction}"), ProductInstance::shared_budget(f.clone(), mu.clone(), T, &base, fraction)?));
        }
        let (nx, ny, nz) = (f.x_size().pow(T as u32), f.y_size().pow(T as u32), f.z_size().pow(T as u32));
        for k in 0..RANDOM_TREES {
            let tree = ProtocolTree::random(nx, ny, nz, 4, &mut trial_rng(p.seed, 0x300, k))?;
            products.push((format!("random#{k}"), ProductInstance::new(f.clone(), mu.clone(), T, tree)?));
        }
        for (proto, inst) in products {
            let s = success_variables(&inst)?;
            for cond in [vec![], vec![1], vec![2]] {
                let pr = s.pr_success(&cond)?;
                if pr == 0.0 {
                    continue;
                }
                let delta1 = delta1_for(eps).max(-pr.log2() / T as f64 + 0.01);
                let c = inst.tree().cost() as f64 / (delta1 * T as f64);
                let tag = format!("{} {proto} C={cond:?} delta1={delta1:.6}", label(&name, n));
                let rep = check_goodcoordinate(&inst, &cond, delta1, c)?;
                let mut chain = Tally::new(SUITE, &tag, "chain steps hold to 1e-9");
                for step in &rep.chain {
                    // Equalities report their residual, inequalities their slack.
                    let margin = match step.comparison {
                        rectbound::directproduct::Comparison::Equal => 1e-9 - (step.lhs - step.rhs).abs(),
                        rectbound::directproduct::Comparison::AtMost => step.rhs - step.lhs,
                        _ => step.lhs - step.rhs,
                    };
                    chain.add(margin, step.pass);
                }
                items.push(chain.finish());
                match rep.j.and_then(|j| rep.coordinates.iter().find(|b| b.i == j)) {
                    Some(b) => {
                        let tag = format!("{tag} j={}", b.i);
                        items.push(Item::at_most(
                            SUITE,
                            &tag,
                            "S(X1_j Y1_j || X_j Y_j) <= 8 delta1",
                            b.divergence,
                            rep.divergence_bound,
                            1e-9,
                        ));
                        items.push(Item::at_most(SUITE, &tag, "I_R(j) <= 16 delta1", b.info_r, 16.0 * delta1, 1e-9));
                        items.push(Item::at_most(SUITE, &tag, "I_M(j) <= 16 delta1 c", b.info_m, 16.0 * delta1 * c, 1e-9));
                        items.push(Item::at_most(SUITE, &tag, "I_MR(j) <= 16 delta1 (c+1)", b.info_mr, rep.information_bound, 1e-9));
                    }
                    None => items.push(Item::holds(SUITE, &tag, "a good coordinate exists", false)),
                }
            }
        }
    }
    Ok(items)
}
