use serde::Serialize;

use super::distribution::r_components;
use super::instance::{coordinate_joint, refs, var, ProductInstance};
use crate::error::{invalid, Error, Result};
use crate::infotheory::{Divergence, JointTable};

/// Arithmetic slack on every step of the chain.
pub const CHAIN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Equal,
    AtLeast,
    Greater,
    AtMost,
}

/// One (in)equality `lhs ⋈ rhs` of the averaging argument.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainStep {
    pub name: String,
    pub lhs: f64,
    pub comparison: Comparison,
    pub rhs: f64,
    pub pass: bool,
}

impl ChainStep {
    fn new(name: impl Into<String>, lhs: f64, comparison: Comparison, rhs: f64) -> ChainStep {
        let pass = match comparison {
            Comparison::Equal => (lhs - rhs).abs() <= CHAIN_TOL,
            Comparison::AtLeast => lhs >= rhs - CHAIN_TOL,
            Comparison::Greater => lhs > rhs - CHAIN_TOL,
            Comparison::AtMost => lhs <= rhs + CHAIN_TOL,
        };
        ChainStep { name: name.into(), lhs, comparison, rhs, pass }
    }
}

/// Per-coordinate quantities for `i ∉ C`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoordinateBounds {
    pub i: usize,
    /// `S(X¹_iY¹_i ‖ X_iY_i)`.
    pub divergence: f64,
    /// `I(X¹_i : R¹_i | Y¹_i) + I(Y¹_i : R¹_i | X¹_i)`.
    pub info_r: f64,
    /// `I(X¹_i : M¹ | R¹_iY¹_i) + I(Y¹_i : M¹ | R¹_iX¹_i)`.
    pub info_m: f64,
    /// `I(X¹_i : M¹R¹_i | Y¹_i) + I(Y¹_i : M¹R¹_i | X¹_i)`.
    pub info_mr: f64,
    /// Within `8δ₁`, `16δ₁` and `16δ₁c` respectively.
    pub qualifies: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GoodCoordinateReport {
    pub t: usize,
    pub conditioned_on: Vec<usize>,
    pub delta1: f64,
    pub c: f64,
    pub pr_condition: f64,
    /// Worst-case transcript length of the product protocol.
    pub communication: usize,
    pub coordinates: Vec<CoordinateBounds>,
    pub chain: Vec<ChainStep>,
    /// Smallest qualifying coordinate; `None` makes this a counterexample.
    pub j: Option<usize>,
    /// `8δ₁`.
    pub divergence_bound: f64,
    /// `16δ₁(c+1)`.
    pub information_bound: f64,
}

impl GoodCoordinateReport {
    pub fn pass(&self) -> bool {
        self.j.is_some() && self.chain.iter().all(|s| s.pass)
    }
}

fn finite(d: Divergence, what: &str) -> Result<f64> {
    match d {
        Divergence::Finite(v) => Ok(v),
        Divergence::Infinite => Err(Error::SupportViolation(format!("{what} is infinite"))),
    }
}

fn names(prefix: &str, coords: impl IntoIterator<Item = usize>) -> Vec<String> {
    coords.into_iter().map(|i| var(prefix, i)).collect()
}

fn cat(parts: &[&[String]]) -> Vec<String> {
    parts.iter().flat_map(|p| p.iter().cloned()).collect()
}

/// Evaluates the averaging argument exactly on the materialized joints and
/// returns the smallest coordinate `j ∉ C` with `S(X¹_jY¹_j‖X_jY_j) ≤ 8δ₁`,
/// `I_R ≤ 16δ₁` and `I_M ≤ 16δ₁c`, hence `I_{MR} ≤ 16δ₁(c+1)`.
///
/// Requires `Pr[T^{(C)} = 1] > 2^{−δ₁t}` and that the protocol communicates
/// at most `δ₁ct` bits.
pub fn check_goodcoordinate(inst: &ProductInstance, cond: &[usize], delta1: f64, c: f64) -> Result<GoodCoordinateReport> {
    let t = inst.t();
    inst.check_coordinates(cond)?;
    if !(delta1 > 0.0) || !delta1.is_finite() {
        return Err(invalid(format!("delta1 = {delta1} must be positive")));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return Err(invalid(format!("c = {c} must be finite and non-negative")));
    }
    let free: Vec<usize> = (1..=t).filter(|i| !cond.contains(i)).collect();
    if free.is_empty() {
        return Err(invalid("every coordinate is conditioned on"));
    }
    let tf = t as f64;
    let communication = inst.tree().cost();
    if communication as f64 > delta1 * c * tf + CHAIN_TOL {
        return Err(Error::Precondition(format!("the protocol sends {communication} bits, more than delta1·c·t = {}", delta1 * c * tf)));
    }
    let (p1, pr_condition) = coordinate_joint(inst, cond)?;
    if !(pr_condition > (-delta1 * tf).exp2()) {
        return Err(Error::Precondition(format!("Pr[T^(C) = 1] = {pr_condition} is not above 2^(-delta1·t) = {}", (-delta1 * tf).exp2())));
    }
    let (q, _) = coordinate_joint(inst, &[])?;

    let all = 1..=t;
    let xs = names("X", all.clone());
    let ys = names("Y", all.clone());
    let ds = names("D", all.clone());
    let us = names("U", all.clone());
    let mut sorted_cond = cond.to_vec();
    sorted_cond.sort_unstable();
    let xc = names("X", sorted_cond.iter().copied());
    let yc = names("Y", sorted_cond.iter().copied());
    let x_free = names("X", free.iter().copied());
    let y_free = names("Y", free.iter().copied());
    let m = vec!["M".to_string()];

    let relent_on = |vars: &[String], what: &str| -> Result<f64> { finite(p1.relent_on(&q, &refs(vars))?, what) };
    let cond_relent = |a: &[String], c: &[String], what: &str| -> Result<f64> { finite(p1.cond_relent(&q, &refs(a), &refs(c))?, what) };
    let cmi = |table: &JointTable, a: &[String], b: &[String], c: &[String]| table.cond_mutual_info(&refs(a), &refs(b), &refs(c));

    let mut chain = Vec::new();
    let budget = delta1 * tf;

    // One coordinate close.
    let xy = cat(&[&xs, &ys]);
    let smin_xy = finite(p1.relminent_on(&q, &refs(&xy))?, "S∞(X¹Y¹‖XY)")?;
    let s_xy = relent_on(&xy, "S(X¹Y¹‖XY)")?;
    let mut split = 0.0;
    let mut divergences = Vec::new();
    for &i in &free {
        let s = relent_on(&[var("X", i), var("Y", i)], "S(X¹_iY¹_i‖X_iY_i)")?;
        divergences.push(s);
        split += s;
    }
    chain.push(ChainStep::new("delta1·t > S∞(X¹Y¹‖XY)", budget, Comparison::Greater, smin_xy));
    chain.push(ChainStep::new("S∞(X¹Y¹‖XY) ≥ S(X¹Y¹‖XY)", smin_xy, Comparison::AtLeast, s_xy));
    chain.push(ChainStep::new("S(X¹Y¹‖XY) ≥ Σ_{i∉C} S(X¹_iY¹_i‖X_iY_i)", s_xy, Comparison::AtLeast, split));

    // The same with the direction bits and revealed halves.
    let xydu = cat(&[&xs, &ys, &ds, &us]);
    let smin_all = finite(p1.relminent_on(&q, &refs(&xydu))?, "S∞(X¹Y¹D¹U¹‖XYDU)")?;
    let s_all = relent_on(&xydu, "S(X¹Y¹D¹U¹‖XYDU)")?;
    let outer = cat(&[&ds, &us, &xc, &yc]);
    let eq2 = cond_relent(&cat(&[&x_free, &y_free]), &outer, "conditioned divergence")?;
    let mut eq3 = 0.0;
    let mut eq4 = 0.0;
    let mut junk = 0.0;
    let mut r_of = Vec::new();
    let mut y_side = Vec::new();
    let mut x_side = Vec::new();
    for &i in &free {
        let (r, known) = r_components(t, cond, i);
        let xi = vec![var("X", i)];
        let yi = vec![var("Y", i)];
        let xk = names("X", known.iter().copied());
        let yk = names("Y", known.iter().copied());
        eq3 += cond_relent(&cat(&[&xi, &yi]), &cat(&[&ds, &us, &xk, &yk]), "per-coordinate divergence")?;
        eq4 += cond_relent(&cat(&[&xi, &yi]), &cat(&[&[var("D", i), var("U", i)], &r]), "per-coordinate divergence")?;
        let ys_ = cond_relent(&yi, &cat(&[&r, &xi]), "S(Y¹_i‖Y_i) given R, X")?;
        let xs_ = cond_relent(&xi, &cat(&[&r, &yi]), "S(X¹_i‖X_i) given R, Y")?;
        junk += 0.5 * (ys_ + xs_);
        y_side.push(ys_);
        x_side.push(xs_);
        r_of.push(r);
    }
    chain.push(ChainStep::new("delta1·t > S∞(X¹Y¹D¹U¹‖XYDU)", budget, Comparison::Greater, smin_all));
    chain.push(ChainStep::new("S∞(X¹Y¹D¹U¹‖XYDU) ≥ S(X¹Y¹D¹U¹‖XYDU)", smin_all, Comparison::AtLeast, s_all));
    chain.push(ChainStep::new("S(X¹Y¹D¹U¹‖XYDU) ≥ E_{d,u,x_C,y_C} S(X¹Y¹‖XY)", s_all, Comparison::AtLeast, eq2));
    chain.push(ChainStep::new("conditioned divergence splits over i ∉ C", eq2, Comparison::Equal, eq3));
    chain.push(ChainStep::new("conditioning on D,U,X_{C∪[i-1]},Y_{C∪[i-1]} is conditioning on D_i,U_i,R_i", eq3, Comparison::Equal, eq4));
    chain.push(ChainStep::new("D_i halves the divergence between the X and Y sides", eq4, Comparison::Equal, junk));

    // Correlated sample: each side bounds the matching mutual information.
    let mut coordinates = Vec::new();
    let mut sum_info_r = 0.0;
    let mut sum_info_m = 0.0;
    let mut eq_m3 = 0.0;
    let mut eq_m4 = 0.0;
    for (k, &i) in free.iter().enumerate() {
        let r = &r_of[k];
        let xi = vec![var("X", i)];
        let yi = vec![var("Y", i)];
        let i_xr = cmi(&p1, &xi, r, &yi)?;
        let i_yr = cmi(&p1, &yi, r, &xi)?;
        chain.push(ChainStep::new(format!("E S(Y¹_{i}|R,X ‖ Y_{i}|X) ≥ I(Y¹_{i}:R¹_{i}|X¹_{i})"), y_side[k], Comparison::AtLeast, i_yr));
        chain.push(ChainStep::new(format!("E S(X¹_{i}|R,Y ‖ X_{i}|Y) ≥ I(X¹_{i}:R¹_{i}|Y¹_{i})"), x_side[k], Comparison::AtLeast, i_xr));
        let i_xm = cmi(&p1, &xi, &m, &cat(&[r, &yi]))?;
        let i_ym = cmi(&p1, &yi, &m, &cat(&[r, &xi]))?;
        let mr = cat(&[&m, r]);
        let i_xmr = cmi(&p1, &xi, &mr, &yi)?;
        let i_ymr = cmi(&p1, &yi, &mr, &xi)?;
        let info_r = i_xr + i_yr;
        let info_m = i_xm + i_ym;
        let info_mr = i_xmr + i_ymr;
        chain.push(ChainStep::new(format!("I_MR({i}) = I_R({i}) + I_M({i})"), info_mr, Comparison::Equal, info_r + info_m));
        let (known, xi_yi) = (r_components(t, cond, i).1, cat(&[&xi, &yi]));
        let xk = names("X", known.iter().copied());
        let yk = names("Y", known.iter().copied());
        eq_m3 += cmi(&p1, &xi_yi, &m, &cat(&[&ds, &us, &xk, &yk]))?;
        eq_m4 += cmi(&p1, &xi_yi, &m, &cat(&[&[var("D", i), var("U", i)], r]))?;
        sum_info_r += info_r;
        sum_info_m += info_m;
        let qualifies =
            divergences[k] <= 8.0 * delta1 + CHAIN_TOL && info_r <= 16.0 * delta1 + CHAIN_TOL && info_m <= 16.0 * delta1 * c + CHAIN_TOL;
        coordinates.push(CoordinateBounds { i, divergence: divergences[k], info_r, info_m, info_mr, qualifies });
    }
    chain.push(ChainStep::new("2·delta1·t > Σ_{i∉C} I_R(i)", 2.0 * budget, Comparison::Greater, sum_info_r));

    // Messages carry little information.
    let h_m = p1.entropy(&refs(&m))?;
    let info_all = cmi(&p1, &cat(&[&x_free, &y_free]), &m, &outer)?;
    chain.push(ChainStep::new("delta1·c·t ≥ |M|", delta1 * c * tf, Comparison::AtLeast, communication as f64));
    chain.push(ChainStep::new("|M| ≥ H(M¹)", communication as f64, Comparison::AtLeast, h_m));
    chain.push(ChainStep::new("H(M¹) ≥ I(X¹Y¹:M¹|D¹U¹X¹_CY¹_C)", h_m, Comparison::AtLeast, info_all));
    chain.push(ChainStep::new("I(X¹Y¹:M¹|D¹U¹X¹_CY¹_C) splits over i ∉ C", info_all, Comparison::Equal, eq_m3));
    chain.push(ChainStep::new("conditioning equals D¹_iU¹_iR¹_i", eq_m3, Comparison::Equal, eq_m4));
    chain.push(ChainStep::new("D_i halves the message information", eq_m4, Comparison::Equal, 0.5 * sum_info_m));

    let j = coordinates.iter().find(|b| b.qualifies).map(|b| b.i);
    if let Some(b) = coordinates.iter().find(|b| Some(b.i) == j) {
        chain.push(ChainStep::new(format!("S(X¹_{0}Y¹_{0}‖X_{0}Y_{0}) ≤ 8·delta1", b.i), b.divergence, Comparison::AtMost, 8.0 * delta1));
        chain.push(ChainStep::new(format!("I_MR({}) ≤ 16·delta1·(c+1)", b.i), b.info_mr, Comparison::AtMost, 16.0 * delta1 * (c + 1.0)));
    }
    Ok(GoodCoordinateReport {
        t,
        conditioned_on: cond.to_vec(),
        delta1,
        c,
        pr_condition,
        communication,
        coordinates,
        chain,
        j,
        divergence_bound: 8.0 * delta1,
        information_bound: 16.0 * delta1 * (c + 1.0),
    })
}
