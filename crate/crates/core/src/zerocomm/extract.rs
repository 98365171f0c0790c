use serde::{Deserialize, Serialize};

use super::protocol::{conditioned_joint, ConditionedJoint, ZeroCommProtocol};
use crate::bounds::{lrec, srec_entropy, MAX_SMOOTH_CELLS};
use crate::domain::{mass_of, Distribution, Rectangle, Relation};
use crate::error::{invalid, Error, Result};
use crate::infotheory::{relent, relminent};
use crate::sampler::ClaimItem;

const DIVERGENCE_SLACK: f64 = 1e-9;
const ERROR_SLACK: f64 = 1e-12;

/// Parameters of the zero-communication lemma.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaParams {
    pub z: usize,
    pub eps: f64,
    pub delta: f64,
    pub eps_prime: f64,
    /// The non-abort exponent: `Pr[A = B ≠ ⊥] ≥ 2^{−c}`.
    pub c: f64,
}

impl LemmaParams {
    fn validate(&self) -> Result<()> {
        if !(self.c >= 1.0 && self.c.is_finite()) {
            return Err(invalid(format!("c = {}; need c >= 1", self.c)));
        }
        for (name, v) in [("eps", self.eps), ("delta", self.delta), ("eps_prime", self.eps_prime)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} = {v}; need a positive value")));
            }
        }
        Ok(())
    }
}

/// The lemma's hypotheses evaluated exactly.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Hypotheses {
    /// `β = Pr_{X′Y′}[f(x, y) = {z}]`.
    pub beta: f64,
    pub nonabort: ClaimItem,
    pub closeness: ClaimItem,
    pub correctness: ClaimItem,
    /// `(δ + 2ε)/(β − 3ε) < (1 + ε′)δ/β`.
    pub slack: ClaimItem,
}

impl Hypotheses {
    pub fn pass(&self) -> bool {
        self.items().iter().all(|i| i.pass)
    }

    pub fn items(&self) -> [&ClaimItem; 4] {
        [&self.nonabort, &self.closeness, &self.correctness, &self.slack]
    }

    fn failures(&self) -> String {
        self.items().iter().filter(|i| !i.pass).map(|i| format!("{}: {} vs {}", i.name, i.lhs, i.rhs)).collect::<Vec<_>>().join("; ")
    }
}

pub fn check_hypotheses(joint: &ConditionedJoint, dist: &Distribution, f: &Relation, params: &LemmaParams) -> Result<Hypotheses> {
    params.validate()?;
    let beta = f.singleton_mass(dist, params.z);
    let (eps, delta) = (params.eps, params.delta);
    let lhs = if beta > 3.0 * eps { (delta + 2.0 * eps) / (beta - 3.0 * eps) } else { f64::INFINITY };
    let rhs = (1.0 + params.eps_prime) * delta / beta;
    Ok(Hypotheses {
        beta,
        nonabort: ClaimItem::at_least("Pr[A=B!=bot] >= 2^-c", joint.nonabort, (-params.c).exp2()),
        closeness: ClaimItem::at_most("l1(X1Y1, X'Y') <= eps", joint.l1_to(dist)?, eps),
        correctness: ClaimItem::at_least("Pr[(X1,Y1,A1) in f] >= 1 - eps", joint.correctness(f, dist), 1.0 - eps),
        slack: ClaimItem { name: "(delta+2eps)/(beta-3eps) < (1+eps')delta/beta".into(), lhs, rhs, pass: lhs < rhs },
    })
}

/// The rectangle found by the Markov search and what it certifies.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Extraction {
    pub coin: usize,
    pub z: usize,
    pub rectangle: Rectangle,
    /// `Pr[R¹ = r₀, A¹ = z]`.
    pub mass: f64,
    /// `S((X¹Y¹)_{r₀,z} ‖ X′Y′)`.
    pub divergence: f64,
    /// `S∞` of the same pair; equal to `divergence` on a rectangle restriction.
    pub min_divergence: f64,
    /// `Pr_{(X¹Y¹)_{r₀,z}}[g(x, y) ≠ {z}]`.
    pub error: f64,
    /// `c/ε`.
    pub divergence_bound: f64,
    /// `(δ + 2ε)/(β − 3ε)`.
    pub error_bound: f64,
    /// `(1 + ε′)δ/β`.
    pub target_error: f64,
    /// Number of `(r, z)` blocks meeting both bucket conditions.
    pub qualifying: usize,
}

impl Extraction {
    pub fn certifies(&self) -> bool {
        self.divergence <= self.divergence_bound + DIVERGENCE_SLACK && self.error <= self.target_error + ERROR_SLACK
    }
}

fn restriction(rect: &Rectangle, dist: &Distribution) -> Vec<f64> {
    let mass = mass_of(rect, dist);
    let ny = dist.y_size();
    (0..dist.masses().len()).map(|i| if rect.contains(i / ny, i % ny) { dist.masses()[i] / mass } else { 0.0 }).collect()
}

/// Searches `(r, z)` blocks for one with `S ≤ c/ε` and conditional error of
/// `g` at most `(δ + 2ε)/(β − 3ε)`. Ties among qualifying coins go to the
/// largest block mass, then the smallest coin.
pub fn extract_rectangle(
    p: &ZeroCommProtocol,
    dist: &Distribution,
    f: &Relation,
    g: &Relation,
    params: &LemmaParams,
) -> Result<Extraction> {
    let joint = conditioned_joint(p, dist)?;
    let hyp = check_hypotheses(&joint, dist, f, params)?;
    if !hyp.pass() {
        return Err(Error::Precondition(hyp.failures()));
    }
    extract_with(&joint, dist, g, params, hyp.beta, f)
}

fn extract_with(
    joint: &ConditionedJoint,
    dist: &Distribution,
    g: &Relation,
    params: &LemmaParams,
    beta: f64,
    f: &Relation,
) -> Result<Extraction> {
    let distance = f.distance(g, dist);
    if distance > params.delta + ERROR_SLACK {
        return Err(Error::Precondition(format!("Pr[f != g] = {distance} exceeds delta = {}", params.delta)));
    }
    let (eps, delta) = (params.eps, params.delta);
    let divergence_bound = params.c / eps;
    let error_bound = (delta + 2.0 * eps) / (beta - 3.0 * eps);
    let ny = dist.y_size();
    let mut best: Option<(usize, f64, f64)> = None;
    let mut qualifying = 0;
    let (mut z_mass, mut small_mass, mut accurate_mass) = (0.0, 0.0, 0.0);
    for (i, o) in joint.outcomes.iter().enumerate().filter(|(_, o)| o.z == params.z) {
        let block = mass_of(&o.rectangle, dist);
        let divergence = -block.log2();
        let wrong: f64 = o
            .rectangle
            .row_indices()
            .flat_map(|x| o.rectangle.col_indices().map(move |y| (x, y)))
            .filter(|&(x, y)| x < dist.x_size() && y < ny && !g.is_exactly(x, y, params.z))
            .map(|(x, y)| dist.prob(x, y))
            .sum();
        let error = wrong / block;
        z_mass += o.mass;
        let small = divergence <= divergence_bound + DIVERGENCE_SLACK;
        let accurate = error <= error_bound + ERROR_SLACK;
        if small {
            small_mass += o.mass;
        }
        if small && accurate {
            accurate_mass += o.mass;
            qualifying += 1;
            if best.is_none_or(|(_, m, _)| o.mass > m) {
                best = Some((i, o.mass, error));
            }
        }
    }
    let Some((i, mass, error)) = best else {
        return Err(Error::Extraction(format!(
            "no (r, z) block qualifies: Pr[A1=z] = {z_mass}, with S <= c/eps: {small_mass}, also accurate: {accurate_mass}"
        )));
    };
    let o = &joint.outcomes[i];
    let restricted = restriction(&o.rectangle, dist);
    let divergence = relent(&restricted, dist.masses())?.value();
    let min_divergence = relminent(&restricted, dist.masses())?.value();
    if (divergence - min_divergence).abs() > DIVERGENCE_SLACK {
        return Err(Error::Extraction(format!("S = {divergence} but S_inf = {min_divergence} on a rectangle restriction")));
    }
    Ok(Extraction {
        coin: o.coin,
        z: o.z,
        rectangle: o.rectangle,
        mass,
        divergence,
        min_divergence,
        error,
        divergence_bound,
        error_bound,
        target_error: (1.0 + params.eps_prime) * delta / beta,
        qualifying,
    })
}

/// Extraction for one admissible `g`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GExtraction {
    /// `g` as a little-endian bitmask over row-major cells.
    pub g_bits: u64,
    pub distance: f64,
    pub extraction: Extraction,
    /// `lrec(g, X′Y′, z, (1+ε′)δ/β)`, at most `extraction.divergence`.
    pub lrec: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ViolationReport {
    pub hypotheses: Hypotheses,
    pub per_g: Vec<GExtraction>,
    pub max_extracted: f64,
    /// `srec_entropy(f, X′Y′, z, (1+ε′)δ/β, δ)` computed by the bounds module.
    pub srec: f64,
    /// `c/ε`.
    pub bound: f64,
    pub pass: bool,
}

/// Runs the extraction for every total boolean `g` within `δ` of `f` and
/// compares the lemma's conclusion with an independent `srec_entropy`.
pub fn srec_violation_report(p: &ZeroCommProtocol, dist: &Distribution, f: &Relation, params: &LemmaParams) -> Result<ViolationReport> {
    if !f.is_total_boolean() {
        return Err(invalid("the g-enumeration needs a total boolean f"));
    }
    let (nx, ny) = (f.x_size(), f.y_size());
    let cells = nx * ny;
    if cells > MAX_SMOOTH_CELLS {
        return Err(Error::SizeCap(format!("{cells} cells exceeds {MAX_SMOOTH_CELLS} for the g-enumeration")));
    }
    let joint = conditioned_joint(p, dist)?;
    let hypotheses = check_hypotheses(&joint, dist, f, params)?;
    if !hypotheses.pass() {
        return Err(Error::Precondition(hypotheses.failures()));
    }
    let target = ((1.0 + params.eps_prime) * params.delta / hypotheses.beta).min(1.0);
    let fvals = f.function_values().expect("total function");
    let mut per_g = Vec::new();
    for bits in 0u64..1 << cells {
        let distance: f64 = (0..cells).filter(|&c| (bits >> c & 1) as usize != fvals[c]).map(|c| dist.masses()[c]).sum();
        if distance > params.delta + ERROR_SLACK {
            continue;
        }
        let g = Relation::tabulate(nx, ny, 2, |x, y| (bits >> (x * ny + y) & 1) as usize)?;
        let extraction = extract_with(&joint, dist, &g, params, hypotheses.beta, f)?;
        let lrec = lrec(&g, dist, params.z, target)?.value;
        per_g.push(GExtraction { g_bits: bits, distance, extraction, lrec });
    }
    let max_extracted = per_g.iter().map(|g| g.extraction.divergence).fold(f64::NEG_INFINITY, f64::max);
    let srec = srec_entropy(f, dist, params.z, target, params.delta)?.value;
    let bound = params.c / params.eps;
    let pass = srec < bound && per_g.iter().all(|g| g.extraction.certifies() && g.lrec <= g.extraction.divergence + DIVERGENCE_SLACK);
    Ok(ViolationReport { hypotheses, per_g, max_extracted, srec, bound, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_family;

    fn params(z: usize, eps: f64, delta: f64, c: f64) -> LemmaParams {
        LemmaParams { z, eps, delta, eps_prime: 1.0, c }
    }

    /// AND with almost all mass on its 1-input.
    fn skewed() -> (Relation, Distribution) {
        let (f, _) = make_family("AND", 1).unwrap();
        (f, Distribution::new(2, 2, vec![0.001, 0.001, 0.001, 0.997]).unwrap())
    }

    #[test]
    fn one_rectangle_protocol() {
        let (f, dist) = skewed();
        let p = ZeroCommProtocol::one_rectangle(2, 2, 2, Rectangle::cell(1, 1), 1).unwrap();
        let prm = params(1, 0.01, 0.05, 1.0);
        let ex = extract_rectangle(&p, &dist, &f, &f, &prm).unwrap();
        assert_eq!(ex.coin, 0);
        assert_eq!(ex.error, 0.0);
        assert!((ex.divergence + 0.997f64.log2()).abs() < 1e-12);
        assert!(ex.certifies());
        let rep = srec_violation_report(&p, &dist, &f, &prm).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.srec < rep.bound);
    }

    #[test]
    fn good_coin_is_selected() {
        // Coin 1 wrongly outputs 1 on the 0-input (0,0).
        let (f, dist) = skewed();
        let parts = [(0.99, Rectangle::cell(1, 1), 1), (0.01, Rectangle::cell(0, 0), 1)];
        let p = ZeroCommProtocol::rectangle_mixture(2, 2, 2, &parts).unwrap();
        let ex = extract_rectangle(&p, &dist, &f, &f, &params(1, 0.01, 0.05, 1.0)).unwrap();
        assert_eq!(ex.coin, 0);
        assert!(ex.certifies());
        // Both blocks are in the divergence bucket; only coin 0 is accurate.
        assert_eq!(ex.qualifying, 1);
    }

    #[test]
    fn closeness_violation_is_a_precondition_error() {
        // Under the uniform law X¹Y¹ is a point mass at distance 3/4.
        let (f, dist) = make_family("AND", 1).unwrap();
        let p = ZeroCommProtocol::one_rectangle(2, 2, 2, Rectangle::cell(1, 1), 1).unwrap();
        let err = extract_rectangle(&p, &dist, &f, &f, &params(1, 0.01, 0.05, 2.0)).unwrap_err();
        assert!(matches!(err, Error::Precondition(ref s) if s.contains("l1(X1Y1")), "{err:?}");
    }
}
