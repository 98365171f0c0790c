use rand::Rng;
use rectbound::infotheory::{check_pinsker, check_ratio_lemma, check_substate, l1_distance, relent, JointTable};

use super::{randomized, Item, SuiteParams, EQ_TOL};
use crate::error::{CliError, CliResult};

/// A random distribution on `k` outcomes; each weight is zeroed with
/// probability `sparsity`, keeping at least one positive.
fn random_dist<R: Rng>(rng: &mut R, k: usize, sparsity: f64) -> Vec<f64> {
    let mut w: Vec<f64> = (0..k).map(|_| if rng.gen_bool(sparsity) { 0.0 } else { rng.gen_range(0.0..1.0) }).collect();
    if w.iter().all(|&v| v == 0.0) {
        w[rng.gen_range(0..k)] = 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

fn equal(a: f64, b: f64) -> (f64, bool) {
    let d = (a - b).abs();
    (EQ_TOL - d, d <= EQ_TOL)
}

fn finite(d: rectbound::infotheory::Divergence) -> CliResult<f64> {
    d.finite().map_err(|e| CliError::Internal(e.to_string()))
}

pub fn chainrules(p: &SuiteParams) -> CliResult<Vec<Item>> {
    let names = ["H(ABC) = H(A) + H(B|A) + H(C|AB)", "I(A:BC) = I(A:B) + I(A:C|B)", "S(P_AB||Q_AB) = S(P_A||Q_A) + E_a S(P_B|a||Q_B|a)"];
    randomized(p, "chainrules", 1, names, |rng| {
        let sizes = [rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(1..=3)];
        let vars = [("A", sizes[0]), ("B", sizes[1]), ("C", sizes[2])];
        let k = sizes.iter().product();
        let pt = JointTable::new(&vars, random_dist(rng, k, 0.2))?;
        let qt = JointTable::new(&vars, random_dist(rng, k, 0.0))?;
        let h = pt.entropy(&["A", "B", "C"])?;
        let h_chain = pt.entropy(&["A"])? + pt.cond_entropy(&["B"], &["A"])? + pt.cond_entropy(&["C"], &["A", "B"])?;
        let i = pt.mutual_info(&["A"], &["B", "C"])?;
        let i_chain = pt.mutual_info(&["A"], &["B"])? + pt.cond_mutual_info(&["A"], &["C"], &["B"])?;
        let s = finite(pt.relent_on(&qt, &["A", "B"])?)?;
        let s_chain = finite(pt.relent_on(&qt, &["A"])?)? + finite(pt.cond_relent(&qt, &["B"], &["A"])?)?;
        Ok([equal(h, h_chain), equal(i, i_chain), equal(s, s_chain)])
    })
}

pub fn convexity(p: &SuiteParams) -> CliResult<Vec<Item>> {
    randomized(p, "convexity", 2, ["S(mix P || mix Q) <= mix of S(P_i || Q_i)"], |rng| {
        let k = rng.gen_range(1..=8);
        let lam = rng.gen_range(0.0..=1.0);
        let (p1, p2) = (random_dist(rng, k, 0.2), random_dist(rng, k, 0.2));
        let (q1, q2) = (random_dist(rng, k, 0.1), random_dist(rng, k, 0.1));
        let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| lam * x + (1.0 - lam) * y).collect::<Vec<f64>>();
        let lhs = relent(&mix(&p1, &p2), &mix(&q1, &q2))?.value();
        let rhs = lam * relent(&p1, &q1)?.value() + (1.0 - lam) * relent(&p2, &q2)?.value();
        // 0·∞ counts as 0: a zero-weight term cannot make the mix infinite.
        let rhs = if lam == 0.0 {
            relent(&p2, &q2)?.value()
        } else if lam == 1.0 {
            relent(&p1, &q1)?.value()
        } else {
            rhs
        };
        let margin = if rhs.is_infinite() { f64::INFINITY } else { rhs - lhs };
        Ok([(margin, margin >= -EQ_TOL)])
    })
}

pub fn pinsker(p: &SuiteParams) -> CliResult<Vec<Item>> {
    randomized(p, "pinsker", 3, ["l1(P, Q) <= sqrt(S(P||Q))"], |rng| {
        let k = rng.gen_range(1..=8);
        let a = random_dist(rng, k, 0.2);
        // Half the trials take Q near P, where the bound is tightest.
        let q = if rng.gen_bool(0.5) {
            let b = random_dist(rng, k, 0.0);
            let s = rng.gen_range(0.0..0.2);
            a.iter().zip(&b).map(|(x, y)| (1.0 - s) * x + s * y).collect()
        } else {
            random_dist(rng, k, 0.2)
        };
        let c = check_pinsker(&a, &q)?;
        Ok([(c.bound - c.l1, c.pass)])
    })
}

pub fn substate(p: &SuiteParams) -> CliResult<Vec<Item>> {
    randomized(p, "substate", 4, ["Pr_X'[X'(x)/X(x) <= 2^((S(X'||X)+1)/delta)] >= 1 - delta"], |rng| {
        let k = rng.gen_range(1..=8);
        let x = random_dist(rng, k, 0.0);
        let xp = random_dist(rng, k, 0.3);
        let delta = rng.gen_range(0.01..0.99);
        let c = check_substate(&x, &xp, delta)?;
        Ok([(c.lhs - (1.0 - delta), c.pass)])
    })
}

pub fn ratiovs1(p: &SuiteParams) -> CliResult<Vec<Item>> {
    let names = ["Pr_A[|1 - A'(a)/A(a)| <= eps/r] >= 1 - 2r", "Pr_A'[|1 - A'(a)/A(a)| <= eps/r] >= 1 - 2r - eps"];
    randomized(p, "ratiovs1", 5, names, |rng| {
        let k = rng.gen_range(1..=8);
        let a = random_dist(rng, k, 0.2);
        let b = random_dist(rng, k, 0.2);
        let eps = rng.gen_range(0.01..0.5);
        let r = rng.gen_range(0.01..0.99);
        // Moving a fraction s towards b shifts A by s·l1(A, B) <= eps.
        let d = l1_distance(&a, &b)?;
        let s = rng.gen_range(0.0..=1.0) * if d > 0.0 { (eps / d).min(1.0) } else { 1.0 };
        let ap: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (1.0 - s) * x + s * y).collect();
        let c = check_ratio_lemma(&a, &ap, eps, r)?;
        let m1 = c.p1 - (1.0 - 2.0 * r);
        let m2 = c.p2 - (1.0 - 2.0 * r - eps);
        Ok([(m1, m1 >= -1e-12), (m2, m2 >= -1e-12)])
    })
}
