use rectbound::protocols::{factorize, ProtocolTree, TranscriptFactorization};
use rectbound::sampler::{
    check_distclose, check_preconditions, exact_analysis, good_sets, idealized_outcome, make_config, random_distclose_instance, Overrides,
    SamplerConfig,
};

use super::{conditioned_instances, family, label, precondition_item, randomized, Item, SuiteParams};
use crate::error::{validation, CliResult};

pub const DEFAULT_EPS: f64 = 0.3;
pub const REDUCED_DELTAS: [f64; 3] = [2.0, 3.0, 4.0];

/// `I(X:M|Y) + I(Y:M|X)` of the factorization.
pub fn measured_information(fac: &TranscriptFactorization) -> CliResult<f64> {
    let j = fac.joint()?;
    Ok(j.cond_mutual_info(&["X"], &["M"], &["Y"])? + j.cond_mutual_info(&["Y"], &["M"], &["X"])?)
}

/// The default information budget: the protocol's own, at least 1.
pub fn default_c(fac: &TranscriptFactorization) -> CliResult<f64> {
    Ok(measured_information(fac)?.max(1.0))
}

/// One-way protocols for the requested families, or `None` to use the
/// conditioned pipeline.
fn family_factorizations(p: &SuiteParams) -> CliResult<Option<Vec<(String, TranscriptFactorization)>>> {
    let Some(fams) = &p.families else { return Ok(None) };
    let mut out = Vec::new();
    for (name, n) in fams {
        let (f, dist) = family(name, *n)?;
        out.push((label(name, *n), factorize(&ProtocolTree::send_then_answer(&f)?, &dist)?));
    }
    Ok(Some(out))
}

/// `(instance, factorization, c)` triples to check.
fn instances(p: &SuiteParams, eps: f64) -> CliResult<Vec<(String, TranscriptFactorization, f64)>> {
    if let Some(list) = family_factorizations(p)? {
        return list
            .into_iter()
            .map(|(l, fac)| {
                let c = match p.c {
                    Some(c) => c,
                    None => default_c(&fac)?,
                };
                Ok((format!("{l} c={c:.6}"), fac, c))
            })
            .collect();
    }
    let mut out = Vec::new();
    for inst in conditioned_instances(eps, p.seed)? {
        for (tag, c) in [("theorem c", inst.c_theorem), ("measured c", inst.c_measured)] {
            out.push((format!("{} {tag}={c:.6}", inst.label), inst.factorization.clone(), c));
        }
    }
    Ok(out)
}

fn config(fac: &TranscriptFactorization, c: f64, eps: f64) -> CliResult<SamplerConfig> {
    Ok(make_config(c, eps, fac.q(), fac.m_size(), false, Overrides::default())?)
}

fn eps_of(p: &SuiteParams) -> CliResult<f64> {
    let eps = p.eps.unwrap_or(DEFAULT_EPS);
    if !(eps > 0.0 && eps < 1.0 / 3.0) {
        return Err(validation(format!("--eps = {eps}; the sampler needs 0 < eps < 1/3")));
    }
    Ok(eps)
}

pub fn probofg(p: &SuiteParams) -> CliResult<Vec<Item>> {
    let eps = eps_of(p)?;
    let mut items = Vec::new();
    for (inst, fac, c) in instances(p, eps)? {
        let cfg = config(&fac, c, eps)?;
        match precondition_item("probofg", &inst, good_sets(&fac, &cfg, None))? {
            Ok(gs) => items.extend(gs.items.iter().map(|i| Item::claim("probofg", &inst, i))),
            Err(item) => items.push(item),
        }
    }
    Ok(items)
}

/// The closeness and information hypotheses, then `ℓ1 ≤ 10ε`.
pub fn singlemessagecloseness(p: &SuiteParams) -> CliResult<Vec<Item>> {
    let eps = eps_of(p)?;
    let mut items = Vec::new();
    for (inst, fac, c) in instances(p, eps)? {
        let cfg = config(&fac, c, eps)?;
        let pre = check_preconditions(&fac, &cfg, None)?;
        items.push(Item::claim("singlemessagecloseness", &inst, &pre.closeness));
        items.push(Item::claim("singlemessagecloseness", &inst, &pre.information));
        let ideal = idealized_outcome(&fac, &cfg)?;
        items.push(Item::claim("singlemessagecloseness", &inst, &ideal.bound));
    }
    Ok(items)
}

pub fn probnonabort_reduced(p: &SuiteParams) -> CliResult<Vec<Item>> {
    let eps = eps_of(p)?;
    let deltas = p.reduced_delta.map_or_else(|| REDUCED_DELTAS.to_vec(), |d| vec![d]);
    let mut fp = p.clone();
    fp.families = Some(p.families_or(&[("AND", 1), ("EQ", 1), ("XOR", 1)]));
    let mut items = Vec::new();
    for (inst, fac, c) in instances(&fp, eps)? {
        for &delta in &deltas {
            let cfg = make_config(c, eps, fac.q(), fac.m_size(), true, Overrides { delta: Some(delta), ..Default::default() })?;
            let ex = exact_analysis(&fac, &cfg, p.hash)?;
            let tag = format!("{inst} Delta={delta}");
            items.push(Item::holds("probnonabort-reduced", &tag, "closeness and information hypotheses hold", ex.asserted));
            items.extend(ex.items.iter().map(|i| Item::claim("probnonabort-reduced", &tag, i)));
        }
    }
    Ok(items)
}

pub fn distclose(p: &SuiteParams) -> CliResult<Vec<Item>> {
    let names = ["l1(AB, A'B') <= delta1 + delta2", "C >= 1 - delta1 - delta2"];
    randomized(p, "distclose", 6, names, |rng| {
        let (h, f, g, d1, d2) = random_distclose_instance(rng);
        let c = check_distclose(&h, &f, &g, d1, d2)?;
        Ok([(d1 + d2 - c.l1, c.l1_pass), (c.normalizer - (1.0 - d1 - d2), c.normalizer_pass)])
    })
}
