use rectbound::bounds::{check_dgeqsrec, lemma_eqv_extract, srec_lp, srec_lp_full_enumeration};
use rectbound::domain::Family;

use super::{family, label, precondition_item, Item, SuiteParams};
use crate::error::CliResult;

const LP_TOL: f64 = 1e-6;
/// Full rectangle enumeration is run up to this many cells.
const FULL_ENUMERATION_CELLS: usize = 16;

/// Every total-function family at the given sizes.
pub fn lp_families(ns: &[usize]) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    for n in ns {
        for f in Family::ALL {
            // GHD is a relation; the covering program is for functions.
            if f != Family::Ghd {
                out.push((f.name().to_string(), *n));
            }
        }
    }
    out
}

fn eps_list(p: &SuiteParams, default: &[f64]) -> Vec<f64> {
    p.eps.map_or_else(|| default.to_vec(), |e| vec![e])
}

pub fn lpduality(p: &SuiteParams) -> CliResult<Vec<Item>> {
    let families = p.families.clone().unwrap_or_else(|| lp_families(&[1, 2]));
    let mut items = Vec::new();
    for (name, n) in families {
        let (f, _) = family(&name, n)?;
        for z in 0..f.z_size() {
            for eps in eps_list(p, &[0.05, 0.1, 0.3]) {
                let inst = format!("{} z={z} eps={eps}", label(&name, n));
                let r = srec_lp(&f, z, eps)?;
                items.push(Item::at_most("lpduality", &inst, "|primal - dual| <= 1e-6", r.gap.abs(), LP_TOL, 0.0));
                items.push(Item::at_most("lpduality", &inst, "cover infeasibility <= 1e-6", r.primal_infeasibility, LP_TOL, 0.0));
                if f.x_size() * f.y_size() <= FULL_ENUMERATION_CELLS {
                    let (full, _) = srec_lp_full_enumeration(&f, z, eps)?;
                    let d = (r.primal_value - full).abs();
                    items.push(Item::at_most("lpduality", &inst, "|row generation - full enumeration| <= 1e-6", d, LP_TOL, 0.0));
                }
            }
        }
    }
    Ok(items)
}

pub fn eqv(p: &SuiteParams) -> CliResult<Vec<Item>> {
    let mut items = Vec::new();
    for (name, n) in p.families_or(&[("AND", 1), ("XOR", 1), ("EQ", 1)]) {
        let (f, _) = family(&name, n)?;
        for z in 0..f.z_size() {
            for eps in eps_list(p, &[0.1, 0.2]) {
                let inst = format!("{} z={z} eps={eps}", label(&name, n));
                let lp = srec_lp(&f, z, eps)?;
                match precondition_item("eqv", &inst, lemma_eqv_extract(&f, z, eps, &lp))? {
                    Ok(ex) => {
                        let mut item = Item::at_least(
                            "eqv",
                            &inst,
                            "lrec(g, mu, z, (1+eps^2)delta/beta) >= log srec_lp + 3 log eps",
                            ex.lrec.value,
                            ex.claimed_lower_bound,
                            1e-9,
                        );
                        item.pass &= ex.pass;
                        items.push(item);
                    }
                    Err(item) => items.push(item),
                }
            }
        }
    }
    Ok(items)
}

/// Smallest `δ` with `(δ+ε)/(β−2ε) < (1+ε′)δ/β`, if any.
fn delta_threshold(beta: f64, eps: f64, eps_prime: f64) -> Option<f64> {
    let k = (1.0 + eps_prime) * (beta - 2.0 * eps) - beta;
    (beta > 2.0 * eps && k > 0.0).then(|| beta * eps / k)
}

pub fn dgeqsrec(p: &SuiteParams) -> CliResult<Vec<Item>> {
    let mut items = Vec::new();
    for (name, n) in p.families_or(&[("AND", 1), ("XOR", 1), ("EQ", 1)]) {
        let (f, dist) = family(&name, n)?;
        for z in 0..f.z_size() {
            let beta = f.singleton_mass(&dist, z);
            for eps in eps_list(p, &[0.05, 0.1]) {
                for eps_prime in [0.5, 1.0, 2.0] {
                    let Some(d0) = delta_threshold(beta, eps, eps_prime) else { continue };
                    for delta in [1.5 * d0, 3.0 * d0] {
                        let inst = format!("{} z={z} eps={eps} eps'={eps_prime} delta={delta:.6}", label(&name, n));
                        let c = check_dgeqsrec(&f, &dist, z, eps, eps_prime, delta)?;
                        let d = c.communication.map_or(f64::INFINITY, f64::from);
                        let mut item = Item::at_least("dgeqsrec", &inst, "D_eps(f) >= srec - log(4/eps)", d, c.lower_bound, 1e-9);
                        item.pass &= c.pass;
                        items.push(item);
                    }
                }
            }
        }
    }
    Ok(items)
}
