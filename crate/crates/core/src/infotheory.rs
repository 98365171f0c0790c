//! Entropies, divergences and mutual informations over finite joint tables,
//! plus exact checks of the ratio lemma, the classical substate theorem and
//! the Pinsker-type bound. Logarithms are base 2; `0·log 0 = 0`.

use serde::Serialize;

use crate::error::{invalid, Error, Result};

const NORMALIZATION_TOL: f64 = 1e-9;
/// Largest joint support a table may hold.
pub const MAX_SUPPORT: usize = 1 << 22;

/// Relative entropy or relative min-entropy; `Infinite` when the first
/// argument puts mass outside the support of the second. Orders after every
/// finite value.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
pub enum Divergence {
    Finite(f64),
    Infinite,
}

impl Divergence {
    pub fn value(self) -> f64 {
        match self {
            Divergence::Finite(v) => v,
            Divergence::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Divergence::Finite(_))
    }

    /// The finite value, or a support-violation error.
    pub fn finite(self) -> Result<f64> {
        match self {
            Divergence::Finite(v) => Ok(v),
            Divergence::Infinite => Err(Error::SupportViolation("divergence is infinite".into())),
        }
    }
}

fn check_same_len(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(format!("lengths {} and {}", p.len(), q.len())));
    }
    Ok(())
}

/// Shannon entropy of a probability vector, in bits.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).sum()
}

/// `S(P‖Q) = Σ P log(P/Q)`.
pub fn relent(p: &[f64], q: &[f64]) -> Result<Divergence> {
    check_same_len(p, q)?;
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return Ok(Divergence::Infinite);
            }
            total += a * (a / b).log2();
        }
    }
    Ok(Divergence::Finite(total))
}

/// `S∞(P‖Q) = max_{x : P(x) > 0} log(P(x)/Q(x))`.
pub fn relminent(p: &[f64], q: &[f64]) -> Result<Divergence> {
    check_same_len(p, q)?;
    let mut best = f64::NEG_INFINITY;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return Ok(Divergence::Infinite);
            }
            best = best.max((a / b).log2());
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(invalid("first argument has empty support"));
    }
    Ok(Divergence::Finite(best))
}

/// Half the ℓ1 norm of `P − Q`.
pub fn l1_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    check_same_len(p, q)?;
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioLemmaCheck {
    /// `Pr_{a←A}[|1 − A′(a)/A(a)| ≤ ε/r]`.
    pub p1: f64,
    /// The same event under `A′`.
    pub p2: f64,
    pub pass: bool,
}

/// Evaluates both probabilities of the ratio lemma exactly.
///
/// Outcomes with `A(a) = 0` carry no weight under `A`; under `A′` they count
/// as violations (the ratio is unbounded).
pub fn check_ratio_lemma(a: &[f64], a_prime: &[f64], eps: f64, r: f64) -> Result<RatioLemmaCheck> {
    let dist = l1_distance(a, a_prime)?;
    if !(r > 0.0 && r < 1.0) {
        return Err(invalid(format!("r = {r} must lie in (0, 1)")));
    }
    if !(eps > 0.0) {
        return Err(invalid(format!("eps = {eps} must be positive")));
    }
    if dist > eps + 1e-12 {
        return Err(Error::Precondition(format!("ℓ1 distance {dist} exceeds eps = {eps}")));
    }
    let threshold = eps / r;
    let mut p1 = 0.0;
    let mut p2 = 0.0;
    for (&pa, &pb) in a.iter().zip(a_prime) {
        if pa > 0.0 && (1.0 - pb / pa).abs() <= threshold + 1e-12 {
            p1 += pa;
            p2 += pb;
        }
    }
    let pass = p1 >= 1.0 - 2.0 * r - 1e-12 && p2 >= 1.0 - 2.0 * r - eps - 1e-12;
    Ok(RatioLemmaCheck { p1, p2, pass })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SubstateCheck {
    /// `Pr_{x←X′}[X′(x)/X(x) ≤ 2^{(S(X′‖X)+1)/δ}]`.
    pub lhs: f64,
    pub log_threshold: f64,
    pub pass: bool,
}

/// Classical substate theorem, evaluated exactly.
pub fn check_substate(x: &[f64], x_prime: &[f64], delta: f64) -> Result<SubstateCheck> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta = {delta} must lie in (0, 1)")));
    }
    let s = relent(x_prime, x)?.finite().map_err(|_| Error::SupportViolation("support(X′) ⊄ support(X)".into()))?;
    let log_threshold = (s + 1.0) / delta;
    let mut lhs = 0.0;
    for (&px, &pp) in x.iter().zip(x_prime) {
        if pp > 0.0 && (pp / px).log2() <= log_threshold + 1e-12 {
            lhs += pp;
        }
    }
    Ok(SubstateCheck { lhs, log_threshold, pass: lhs >= 1.0 - delta - 1e-12 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PinskerCheck {
    pub l1: f64,
    /// `√S(P‖Q)`, infinite when the divergence is.
    pub bound: f64,
    pub pass: bool,
}

/// `‖P − Q‖₁ ≤ √S(P‖Q)`.
pub fn check_pinsker(p: &[f64], q: &[f64]) -> Result<PinskerCheck> {
    let l1 = l1_distance(p, q)?;
    let bound = relent(p, q)?.value().max(0.0).sqrt();
    Ok(PinskerCheck { l1, bound, pass: l1 <= bound + 1e-9 })
}

/// A joint probability table over named finite variables, stored row-major
/// with the last variable varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct JointTable {
    names: Vec<String>,
    sizes: Vec<usize>,
    probs: Vec<f64>,
}

impl JointTable {
    pub fn new(vars: &[(&str, usize)], probs: Vec<f64>) -> Result<Self> {
        let table = Self::unnormalized(vars, probs)?;
        let total: f64 = table.probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(invalid(format!("joint table sums to {total}")));
        }
        Ok(table)
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(vars: &[(&str, usize)], weights: Vec<f64>) -> Result<Self> {
        let mut table = Self::unnormalized(vars, weights)?;
        let total: f64 = table.probs.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NullEvent("weights have zero total".into()));
        }
        table.probs.iter_mut().for_each(|p| *p /= total);
        Ok(table)
    }

    fn unnormalized(vars: &[(&str, usize)], probs: Vec<f64>) -> Result<Self> {
        let mut names: Vec<String> = Vec::with_capacity(vars.len());
        for (n, s) in vars {
            if *s == 0 {
                return Err(invalid(format!("variable {n} has empty range")));
            }
            if names.iter().any(|m| m == n) {
                return Err(invalid(format!("duplicate variable {n}")));
            }
            names.push((*n).to_string());
        }
        let sizes: Vec<usize> = vars.iter().map(|v| v.1).collect();
        let support = sizes.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s).filter(|&v| v <= MAX_SUPPORT));
        let support = support.ok_or_else(|| Error::SizeCap(format!("joint support exceeds {MAX_SUPPORT}")))?;
        if probs.len() != support {
            return Err(Error::DimensionMismatch(format!("{} probabilities for support {support}", probs.len())));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(invalid("probabilities must be finite and non-negative"));
        }
        Ok(JointTable { names, sizes, probs })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn size_of(&self, name: &str) -> Result<usize> {
        Ok(self.sizes[self.index_of(name)?])
    }

    fn index_of(&self, name: &str) -> Result<usize> {
        self.names.iter().position(|n| n == name).ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    fn positions(&self, vars: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(vars.len());
        for v in vars {
            let i = self.index_of(v)?;
            if out.contains(&i) {
                return Err(invalid(format!("variable {v} listed twice")));
            }
            out.push(i);
        }
        Ok(out)
    }

    /// Strides of each variable in the flat table.
    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.sizes.len()];
        for i in (0..self.sizes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.sizes[i + 1];
        }
        strides
    }

    /// Maps every flat index of `self` to its flat index in the marginal over
    /// `positions` (in that order).
    fn projection(&self, positions: &[usize]) -> (Vec<usize>, usize) {
        let strides = self.strides();
        let mut out_strides = vec![1usize; positions.len()];
        for k in (0..positions.len().saturating_sub(1)).rev() {
            out_strides[k] = out_strides[k + 1] * self.sizes[positions[k + 1]];
        }
        let out_size: usize = positions.iter().map(|&p| self.sizes[p]).product();
        let map = (0..self.probs.len())
            .map(|flat| positions.iter().zip(&out_strides).map(|(&p, &os)| (flat / strides[p] % self.sizes[p]) * os).sum())
            .collect();
        (map, out_size)
    }

    /// Marginal over `vars`, in the given order.
    pub fn marginal(&self, vars: &[&str]) -> Result<JointTable> {
        let positions = self.positions(vars)?;
        let (map, out_size) = self.projection(&positions);
        let mut probs = vec![0.0; out_size];
        for (flat, &p) in self.probs.iter().enumerate() {
            probs[map[flat]] += p;
        }
        Ok(JointTable {
            names: positions.iter().map(|&p| self.names[p].clone()).collect(),
            sizes: positions.iter().map(|&p| self.sizes[p]).collect(),
            probs,
        })
    }

    /// `H(vars)`; the empty list has entropy 0.
    pub fn entropy(&self, vars: &[&str]) -> Result<f64> {
        if vars.is_empty() {
            return Ok(0.0);
        }
        Ok(entropy(&self.marginal(vars)?.probs))
    }

    /// `H(A | C)`.
    pub fn cond_entropy(&self, a: &[&str], c: &[&str]) -> Result<f64> {
        Ok(self.entropy(&concat(a, c))? - self.entropy(c)?)
    }

    /// `I(A : B) = H(A) + H(B) − H(AB)`.
    pub fn mutual_info(&self, a: &[&str], b: &[&str]) -> Result<f64> {
        Ok(self.entropy(a)? + self.entropy(b)? - self.entropy(&concat(a, b))?)
    }

    /// `I(A : B | C) = H(AC) + H(BC) − H(ABC) − H(C)`.
    pub fn cond_mutual_info(&self, a: &[&str], b: &[&str], c: &[&str]) -> Result<f64> {
        let ac = concat(a, c);
        let bc = concat(b, c);
        let abc = concat(a, &bc);
        Ok(self.entropy(&ac)? + self.entropy(&bc)? - self.entropy(&abc)? - self.entropy(c)?)
    }

    /// Conditional table `P(A | C = c)` for every `c`, as rows over the flat
    /// index of `C`. Rows with `P(c) = 0` are `None`.
    pub fn conditionals(&self, a: &[&str], c: &[&str]) -> Result<Vec<Option<Vec<f64>>>> {
        let joint = self.marginal(&concat(c, a))?;
        let a_size: usize = a.iter().map(|v| self.size_of(v)).collect::<Result<Vec<_>>>()?.iter().product();
        Ok(joint
            .probs
            .chunks(a_size)
            .map(|row| {
                let total: f64 = row.iter().sum();
                (total > 0.0).then(|| row.iter().map(|p| p / total).collect())
            })
            .collect())
    }

    /// `E_{c←P_C}[S(P_{A|c} ‖ Q_{A|c})]` where `Q` may be a table over a
    /// superset of variables (it is marginalized). Evaluated term by term.
    pub fn cond_relent(&self, q: &JointTable, a: &[&str], c: &[&str]) -> Result<Divergence> {
        let p_weights = if c.is_empty() { vec![1.0] } else { self.marginal(c)?.probs };
        let p_rows = self.conditionals(a, c)?;
        let q_rows = q.conditionals(a, c)?;
        if p_rows.len() != q_rows.len() {
            return Err(Error::DimensionMismatch("conditioning ranges differ".into()));
        }
        let mut total = 0.0;
        for ((w, pr), qr) in p_weights.iter().zip(&p_rows).zip(&q_rows) {
            if *w <= 0.0 {
                continue;
            }
            let (Some(pr), Some(qr)) = (pr, qr) else {
                return Ok(Divergence::Infinite);
            };
            match relent(pr, qr)? {
                Divergence::Finite(v) => total += w * v,
                Divergence::Infinite => return Ok(Divergence::Infinite),
            }
        }
        Ok(Divergence::Finite(total))
    }

    /// `S(P_V ‖ Q_V)` on the marginals over `vars`.
    pub fn relent_on(&self, q: &JointTable, vars: &[&str]) -> Result<Divergence> {
        relent(&self.marginal(vars)?.probs, &q.marginal(vars)?.probs)
    }

    /// `S∞(P_V ‖ Q_V)` on the marginals over `vars`.
    pub fn relminent_on(&self, q: &JointTable, vars: &[&str]) -> Result<Divergence> {
        relminent(&self.marginal(vars)?.probs, &q.marginal(vars)?.probs)
    }

    /// The product of the marginals over `a` and `b`, as a table over `a ++ b`.
    pub fn product_of_marginals(&self, a: &[&str], b: &[&str]) -> Result<JointTable> {
        let ma = self.marginal(a)?;
        let mb = self.marginal(b)?;
        let probs = ma.probs.iter().flat_map(|pa| mb.probs.iter().map(move |pb| pa * pb)).collect();
        let mut names = ma.names;
        names.extend(mb.names);
        let mut sizes = ma.sizes;
        sizes.extend(mb.sizes);
        Ok(JointTable { names, sizes, probs })
    }
}

fn concat<'a>(a: &[&'a str], b: &[&'a str]) -> Vec<&'a str> {
    a.iter().chain(b).copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn normalize(w: &[f64]) -> Vec<f64> {
        let t: f64 = w.iter().sum();
        w.iter().map(|v| v / t).collect()
    }

    #[test]
    fn basic_values() {
        assert_abs_diff_eq!(entropy(&[0.5, 0.5]), 1.0);
        assert_eq!(relent(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), Divergence::Finite(0.0));
        assert_eq!(relminent(&[1.0, 0.0, 0.0, 0.0], &[0.25; 4]).unwrap(), Divergence::Finite(2.0));
        assert_eq!(relent(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), Divergence::Infinite);
        assert!(Divergence::Infinite > Divergence::Finite(1e300));
    }

    #[test]
    fn l1_examples() {
        assert_eq!(l1_distance(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert_eq!(l1_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(l1_distance(&[0.5, 0.5], &[0.6, 0.4]).unwrap(), 0.1, epsilon = 1e-15);
        assert!(l1_distance(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn ratio_lemma_examples() {
        let same = check_ratio_lemma(&[0.3, 0.7], &[0.3, 0.7], 0.1, 0.3).unwrap();
        assert_eq!((same.p1, same.p2, same.pass), (1.0, 1.0, true));
        let c = check_ratio_lemma(&[0.5, 0.5], &[0.6, 0.4], 0.1, 0.25).unwrap();
        assert_abs_diff_eq!(c.p1, 1.0);
        assert!(c.pass);
        assert!(matches!(check_ratio_lemma(&[1.0, 0.0], &[0.0, 1.0], 0.1, 0.5), Err(Error::Precondition(_))));
    }

    #[test]
    fn substate_examples() {
        let c = check_substate(&[0.25; 4], &[1.0, 0.0, 0.0, 0.0], 0.5).unwrap();
        assert_abs_diff_eq!(c.log_threshold, 6.0);
        assert_eq!(c.lhs, 1.0);
        assert!(c.pass);
        assert!(matches!(check_substate(&[1.0, 0.0], &[0.5, 0.5], 0.5), Err(Error::SupportViolation(_))));
    }

    #[test]
    fn pinsker_point_vs_uniform() {
        let c = check_pinsker(&[1.0, 0.0, 0.0, 0.0], &[0.25; 4]).unwrap();
        assert_abs_diff_eq!(c.l1, 0.75);
        assert_abs_diff_eq!(c.bound, 2f64.sqrt());
        assert!(c.pass);
    }

    #[test]
    fn mutual_information_extremes() {
        let indep = JointTable::new(&[("A", 2), ("B", 2)], vec![0.25; 4]).unwrap();
        assert_abs_diff_eq!(indep.mutual_info(&["A"], &["B"]).unwrap(), 0.0);
        let copy = JointTable::new(&[("A", 2), ("B", 2)], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert_abs_diff_eq!(copy.mutual_info(&["A"], &["B"]).unwrap(), 1.0);
        assert!(matches!(copy.entropy(&["C"]), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn marginal_reorders() {
        let t = JointTable::new(&[("A", 2), ("B", 3)], normalize(&[1., 2., 3., 4., 5., 6.])).unwrap();
        let m = t.marginal(&["B", "A"]).unwrap();
        assert_abs_diff_eq!(m.probs()[1], 4.0 / 21.0);
        assert_abs_diff_eq!(m.probs()[2], 2.0 / 21.0);
    }

    fn subset_l1(p: &[f64], q: &[f64]) -> f64 {
        (0u32..1 << p.len()).map(|s| (0..p.len()).filter(|i| s >> i & 1 == 1).map(|i| p[i] - q[i]).sum::<f64>().abs()).fold(0.0, f64::max)
    }

    proptest! {
        #[test]
        fn l1_is_max_over_subsets(w in proptest::collection::vec(0.0f64..1.0, 2..=16),
                                  v in proptest::collection::vec(0.0f64..1.0, 16)) {
            let n = w.len();
            prop_assume!(w.iter().sum::<f64>() > 0.0 && v[..n].iter().sum::<f64>() > 0.0);
            let p = normalize(&w);
            let q = normalize(&v[..n]);
            let d = l1_distance(&p, &q).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
            prop_assert!((d - subset_l1(&p, &q)).abs() < 1e-12);
        }

        #[test]
        fn relent_below_relminent(w in proptest::collection::vec(0.01f64..1.0, 6),
                                  v in proptest::collection::vec(0.01f64..1.0, 6)) {
            let p = normalize(&w);
            let q = normalize(&v);
            let s = relent(&p, &q).unwrap().value();
            prop_assert!(s >= -1e-12);
            prop_assert!(s <= relminent(&p, &q).unwrap().value() + 1e-12);
        }

        #[test]
        fn chain_rule_for_mutual_information(w in proptest::collection::vec(0.0f64..1.0, 2 * 3 * 2)) {
            prop_assume!(w.iter().sum::<f64>() > 0.0);
            let t = JointTable::from_weights(&[("X", 2), ("Y", 3), ("Z", 2)], w).unwrap();
            let lhs = t.mutual_info(&["X"], &["Y", "Z"]).unwrap();
            let rhs = t.mutual_info(&["X"], &["Z"]).unwrap() + t.cond_mutual_info(&["X"], &["Y"], &["Z"]).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9);
            prop_assert!(t.cond_mutual_info(&["X"], &["Y"], &["Z"]).unwrap() > -1e-9);
        }
    }
}
