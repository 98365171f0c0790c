use rand::Rng;
use rectbound::domain::{make_family, Distribution, Rectangle, Relation};
use rectbound::protocols::{factorize, ProtocolTree};
use rectbound::sampler::{make_config, HashFamily, Overrides};
use rectbound::zerocomm::{conditioned_joint, pi_prime_protocol, srec_violation_report, LemmaParams, ZeroCommProtocol};

use super::{precondition_item, trial_rng, Item, SuiteParams};
use crate::error::CliResult;

const SUITE: &str = "zeroprotocolimpliesrec";
const SKEWED_VARIANTS: u64 = 4;

struct Case {
    label: String,
    protocol: ZeroCommProtocol,
    dist: Distribution,
    f: Relation,
    params: LemmaParams,
}

/// AND with mass `1 − η` on its 1-input.
fn skewed_and(eta: f64) -> CliResult<(Relation, Distribution)> {
    let (f, _) = make_family("AND", 1)?;
    let d = Distribution::new(2, 2, vec![eta / 3.0, eta / 3.0, eta / 3.0, 1.0 - eta])?;
    Ok((f, d))
}

fn cases(seed: u64) -> CliResult<Vec<Case>> {
    let mut out = Vec::new();
    let params = LemmaParams { z: 1, eps: 0.01, delta: 0.05, eps_prime: 1.0, c: 1.0 };
    for k in 0..SKEWED_VARIANTS {
        let eta = trial_rng(seed, 0x200, k).gen_range(0.0001..0.01);
        let (f, dist) = skewed_and(eta)?;
        out.push(Case {
            label: format!("one-rectangle AND eta={eta:.6}"),
            protocol: ZeroCommProtocol::one_rectangle(2, 2, 2, Rectangle::cell(1, 1), 1)?,
            dist: dist.clone(),
            f: f.clone(),
            params,
        });
        // A rare second coin answers 1 on a 0-input.
        let parts = [(0.99, Rectangle::cell(1, 1), 1), (0.01, Rectangle::cell(0, 0), 1)];
        out.push(Case {
            label: format!("mixture AND eta={eta:.6}"),
            protocol: ZeroCommProtocol::rectangle_mixture(2, 2, 2, &parts)?,
            dist,
            f,
            params,
        });
    }
    // The sampler written out over its coin space, on the 0-output of AND.
    let (f, dist) = make_family("AND", 1)?;
    let fac = factorize(&ProtocolTree::send_then_answer(&f)?, &dist)?;
    for (delta, t, k) in [(2.0, 2, 1), (2.0, 2, 2), (3.0, 2, 2)] {
        let over = Overrides { delta: Some(delta), iterations: Some(t), hash_bits: Some(k) };
        let cfg = make_config(1.5, 0.1, fac.q(), fac.m_size(), true, over)?;
        let bridge = pi_prime_protocol(&fac, &cfg, HashFamily::Affine)?;
        let nonabort = conditioned_joint(&bridge.protocol, &dist)?.nonabort;
        let c = (-nonabort.log2()).ceil().max(1.0);
        out.push(Case {
            label: format!("sampler AND Delta={delta} T={t} k={k}"),
            protocol: bridge.protocol,
            dist: dist.clone(),
            f: f.clone(),
            params: LemmaParams { z: 0, eps: 0.1, delta: 0.2, eps_prime: 3.0, c },
        });
    }
    Ok(out)
}

pub fn zeroprotocolimpliesrec(p: &SuiteParams) -> CliResult<Vec<Item>> {
    let mut items = Vec::new();
    for case in cases(p.seed)? {
        let inst = format!("{} c={} eps={}", case.label, case.params.c, case.params.eps);
        let rep = match precondition_item(SUITE, &inst, srec_violation_report(&case.protocol, &case.dist, &case.f, &case.params))? {
            Ok(r) => r,
            Err(item) => {
                items.push(item);
                continue;
            }
        };
        items.extend(rep.hypotheses.items().iter().map(|i| Item::claim(SUITE, &inst, i)));
        for g in &rep.per_g {
            let ex = &g.extraction;
            let tag = format!("{inst} g={:#x}", g.g_bits);
            items.push(Item::at_most(SUITE, &tag, "S_inf(rectangle) <= c/eps", ex.min_divergence, ex.divergence_bound, 1e-9));
            items.push(Item::at_most(SUITE, &tag, "error on rectangle <= (1+eps')delta/beta", ex.error, ex.target_error, 1e-12));
            items.push(Item::holds(SUITE, &tag, "extraction certifies", ex.certifies()));
        }
        items.push(Item::at_most(SUITE, &inst, "srec_entropy < c/eps", rep.srec, rep.bound, 0.0));
        items.push(Item::holds(SUITE, &inst, "report passes", rep.pass));
    }
    Ok(items)
}
