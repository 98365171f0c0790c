use serde::Serialize;

use super::derived::{derived_quantities, DerivedQuantities};
use super::SamplerConfig;
use crate::domain::Relation;
use crate::error::{Error, Result};
use crate::infotheory::{l1_distance, relent};
use crate::protocols::TranscriptFactorization;

/// Slack on set-membership thresholds.
const MEMBERSHIP_SLACK: f64 = 1e-12;
/// Slack on the claimed inequalities.
const CLAIM_SLACK: f64 = 1e-9;

/// One inequality with its two sides.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClaimItem {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl ClaimItem {
    pub(crate) fn at_least(name: &str, lhs: f64, rhs: f64) -> ClaimItem {
        ClaimItem { name: name.into(), lhs, rhs, pass: lhs >= rhs - CLAIM_SLACK }
    }

    pub(crate) fn at_most(name: &str, lhs: f64, rhs: f64) -> ClaimItem {
        ClaimItem { name: name.into(), lhs, rhs, pass: lhs <= rhs + CLAIM_SLACK }
    }

    pub(crate) fn holds(name: &str, pass: bool) -> ClaimItem {
        ClaimItem { name: name.into(), lhs: pass as u8 as f64, rhs: 1.0, pass }
    }
}

/// The hypotheses on `XYM` under which the sampler is analysed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Preconditions {
    /// `S(XY‖p) ≤ ε²/4`.
    pub closeness: ClaimItem,
    /// `I(X:M|Y) + I(Y:M|X) ≤ c`.
    pub information: ClaimItem,
    /// `err_f(XYM) ≤ ε`, when a relation is supplied.
    pub error: Option<ClaimItem>,
}

impl Preconditions {
    pub fn pass(&self) -> bool {
        self.closeness.pass && self.information.pass && self.error.as_ref().is_none_or(|e| e.pass)
    }

    pub fn items(&self) -> Vec<&ClaimItem> {
        let mut out = vec![&self.closeness, &self.information];
        out.extend(self.error.as_ref());
        out
    }

    fn failures(&self) -> String {
        self.items().into_iter().filter(|i| !i.pass).map(|i| format!("{}: {} vs {}", i.name, i.lhs, i.rhs)).collect::<Vec<_>>().join("; ")
    }
}

pub fn check_preconditions(fac: &TranscriptFactorization, cfg: &SamplerConfig, f: Option<&Relation>) -> Result<Preconditions> {
    let joint = fac.joint()?;
    let xy = joint.marginal(&["X", "Y"])?;
    let closeness = relent(xy.probs(), fac.p().masses())?.value();
    let info = joint.cond_mutual_info(&["X"], &["M"], &["Y"])? + joint.cond_mutual_info(&["Y"], &["M"], &["X"])?;
    let error = f.map(|f| fac.err_f(f)).transpose()?;
    Ok(Preconditions {
        closeness: ClaimItem::at_most("S(XY||p) <= eps^2/4", closeness, cfg.eps * cfg.eps / 4.0),
        information: ClaimItem::at_most("I(X:M|Y) + I(Y:M|X) <= c", info, cfg.c),
        error: error.map(|e| ClaimItem::at_most("err_f(XYM) <= eps", e, cfg.eps)),
    })
}

/// Membership diagnostics for one input pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairDiagnostics {
    pub x: usize,
    pub y: usize,
    pub p: f64,
    pub alpha_xy_ratio: f64,
    pub alpha_x_ratio: f64,
    pub alpha_y_ratio: f64,
    /// `S(M_xy‖M_x) + S(M_xy‖M_y)`; infinite when undefined.
    pub divergence_sum: f64,
    /// `Pr_{m←M_xy}[m ∈ G_xy]`; 0 when `M_xy` is undefined.
    pub g_xy_mass: f64,
    pub in_g1: bool,
    pub in_g2: bool,
    pub in_g: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GoodSets {
    pub preconditions: Preconditions,
    pub pairs: Vec<PairDiagnostics>,
    pub p_g1: f64,
    pub p_g2: f64,
    pub p_g1_g2: f64,
    /// The four measure statements, in order.
    pub items: Vec<ClaimItem>,
}

impl GoodSets {
    pub fn pass(&self) -> bool {
        self.items.iter().all(|i| i.pass)
    }

    pub fn pair(&self, x: usize, y: usize) -> Option<&PairDiagnostics> {
        self.pairs.iter().find(|d| d.x == x && d.y == y)
    }
}

/// `m ∈ G_xy`: `u_x(m) ≤ 2^Δ v_y(m)` and `u_y(m) ≤ 2^Δ v_x(m)`.
pub(crate) fn in_g_xy(ux: f64, uy: f64, vx: f64, vy: f64, two_delta: f64) -> bool {
    ux <= two_delta * vy + MEMBERSHIP_SLACK && uy <= two_delta * vx + MEMBERSHIP_SLACK
}

pub(crate) fn pair_diagnostics(fac: &TranscriptFactorization, d: &DerivedQuantities, cfg: &SamplerConfig) -> Result<Vec<PairDiagnostics>> {
    let two_delta = cfg.two_delta();
    let q = fac.q();
    let mut out = Vec::with_capacity(d.x_size * d.y_size);
    for x in 0..d.x_size {
        let m_x = d.m_x(fac, x);
        for y in 0..d.y_size {
            let m_y = d.m_y(fac, y);
            let m_xy = d.m_xy(fac, x, y);
            let ratios = [d.alpha_xy(x, y) / q, d.alpha_x[x] / q, d.alpha_y[y] / q];
            let x_defined = !d.undefined_x.contains(&x) && !d.undefined_y.contains(&y);
            let in_g1 = x_defined && ratios.iter().all(|r| (1.0 - r).abs() <= 0.5 + MEMBERSHIP_SLACK);
            let divergence_sum = match (&m_xy, &m_x, &m_y) {
                (Some(a), Some(b), Some(c)) => relent(a, b)?.value() + relent(a, c)?.value(),
                _ => f64::INFINITY,
            };
            let in_g2 = divergence_sum <= cfg.c / cfg.eps + MEMBERSHIP_SLACK;
            let g_xy_mass = match &m_xy {
                Some(law) => (0..d.m_size)
                    .filter(|&m| in_g_xy(fac.ux(x, m), fac.uy(y, m), d.vx_row(x)[m], d.vy_row(y)[m], two_delta))
                    .map(|m| law[m])
                    .sum(),
                None => 0.0,
            };
            let in_g = m_xy.is_some() && g_xy_mass >= 1.0 - 2.0 * cfg.eps - MEMBERSHIP_SLACK;
            out.push(PairDiagnostics {
                x,
                y,
                p: fac.p().prob(x, y),
                alpha_xy_ratio: ratios[0],
                alpha_x_ratio: ratios[1],
                alpha_y_ratio: ratios[2],
                divergence_sum,
                g_xy_mass,
                in_g1,
                in_g2,
                in_g,
            });
        }
    }
    Ok(out)
}

/// `G₁`, `G₂`, `G` and the four measure statements about them. Fails with
/// a per-condition report when the closeness or information hypothesis is
/// violated.
pub fn good_sets(fac: &TranscriptFactorization, cfg: &SamplerConfig, f: Option<&Relation>) -> Result<GoodSets> {
    let preconditions = check_preconditions(fac, cfg, f)?;
    if !(preconditions.closeness.pass && preconditions.information.pass) {
        return Err(Error::Precondition(preconditions.failures()));
    }
    let d = derived_quantities(fac);
    let pairs = pair_diagnostics(fac, &d, cfg)?;
    let mass = |pred: &dyn Fn(&PairDiagnostics) -> bool| pairs.iter().filter(|d| pred(d)).map(|d| d.p).sum::<f64>();
    let p_g1 = mass(&|d| d.in_g1);
    let p_g2 = mass(&|d| d.in_g2);
    let p_g1_g2 = mass(&|d| d.in_g1 && d.in_g2);
    let eps = cfg.eps;
    let subset = pairs.iter().all(|d| !(d.in_g1 && d.in_g2) || d.in_g);
    let items = vec![
        // Strict in the statement; the slack only absorbs rounding.
        ClaimItem { name: "p(G1) > 1 - 6eps".into(), lhs: p_g1, rhs: 1.0 - 6.0 * eps, pass: p_g1 > 1.0 - 6.0 * eps - CLAIM_SLACK },
        ClaimItem::at_least("p(G2) >= 1 - 3eps/2", p_g2, 1.0 - 1.5 * eps),
        ClaimItem::at_least("p(G1 & G2) >= 1 - 15eps/2", p_g1_g2, 1.0 - 7.5 * eps),
        ClaimItem::holds("G1 & G2 subset of G", subset),
    ];
    Ok(GoodSets { preconditions, pairs, p_g1, p_g2, p_g1_g2, items })
}

/// The conditioned law `Pr[X¹Y¹M¹ = xym] = p(x,y)·w_xy(m)/C` with
/// `w_xy(m) = min{u_x, 2^Δ v_y}·min{u_y, 2^Δ v_x}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdealizedOutcome {
    /// `w`, row-major over `X × Y × M`.
    pub w: Vec<f64>,
    /// `C = Σ p·w`.
    pub normalizer: f64,
    /// `X¹Y¹M¹`, row-major over `X × Y × M`.
    pub joint: Vec<f64>,
    /// `ℓ1(XYM, X¹Y¹M¹)`.
    pub l1_messages: f64,
    /// `ℓ1(X¹Y¹A¹B¹, XY M̃M̃)` on `(x, y, output)`.
    pub l1_outputs: f64,
    pub bound: ClaimItem,
    /// Whether the bound is asserted (the closeness and information
    /// hypotheses hold).
    pub asserted: bool,
}

pub fn idealized_outcome(fac: &TranscriptFactorization, cfg: &SamplerConfig) -> Result<IdealizedOutcome> {
    let d = derived_quantities(fac);
    let two_delta = cfg.two_delta();
    let (nx, ny, nm) = (d.x_size, d.y_size, d.m_size);
    let mut w = vec![0.0; nx * ny * nm];
    let mut normalizer = 0.0;
    for x in 0..nx {
        for y in 0..ny {
            for m in 0..nm {
                let a = fac.ux(x, m).min(two_delta * d.vy_row(y)[m]);
                let b = fac.uy(y, m).min(two_delta * d.vx_row(x)[m]);
                w[(x * ny + y) * nm + m] = a * b;
                normalizer += fac.p().prob(x, y) * a * b;
            }
        }
    }
    if !(normalizer > 0.0) {
        return Err(Error::NullEvent("C = Σ p·w is zero".into()));
    }
    let joint: Vec<f64> = (0..nx * ny * nm).map(|i| fac.p().masses()[i / nm] * w[i] / normalizer).collect();
    let original = fac.joint()?;
    let l1_messages = l1_distance(original.probs(), &joint)?;
    let nz = fac.z_size();
    let mut a = vec![0.0; nx * ny * nz];
    let mut b = vec![0.0; nx * ny * nz];
    for (i, (&o, &j)) in original.probs().iter().zip(&joint).enumerate() {
        let z = fac.outputs()[i % nm];
        a[i / nm * nz + z] += o;
        b[i / nm * nz + z] += j;
    }
    let l1_outputs = l1_distance(&a, &b)?;
    let pre = check_preconditions(fac, cfg, None)?;
    Ok(IdealizedOutcome {
        w,
        normalizer,
        joint,
        l1_messages,
        l1_outputs,
        bound: ClaimItem::at_most("l1(XYM, X1Y1M1) <= 10eps", l1_messages, 10.0 * cfg.eps),
        asserted: pre.pass(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_family, Distribution};
    use crate::protocols::{factorize, ProtocolTree};
    use crate::sampler::{make_config, Overrides};

    fn degenerate() -> TranscriptFactorization {
        TranscriptFactorization::new(Distribution::uniform(2, 2), vec![1.0; 2], vec![1.0; 2], vec![0], 1).unwrap()
    }

    fn cfg(c: f64, eps: f64, q: f64, m: usize) -> SamplerConfig {
        make_config(c, eps, q, m, false, Overrides::default()).unwrap()
    }

    #[test]
    fn degenerate_instance_is_all_good() {
        let fac = degenerate();
        let gs = good_sets(&fac, &cfg(1.0, 0.1, 1.0, 1), None).unwrap();
        assert!(gs.pairs.iter().all(|d| d.in_g1 && d.in_g2 && d.in_g));
        assert!(gs.pass());
        let ideal = idealized_outcome(&fac, &cfg(1.0, 0.1, 1.0, 1)).unwrap();
        assert_eq!(ideal.l1_messages, 0.0);
    }

    #[test]
    fn and_protocol_at_point_three() {
        let (f, p) = make_family("AND", 1).unwrap();
        let fac = factorize(&ProtocolTree::send_then_answer(&f).unwrap(), &p).unwrap();
        let c = cfg(1.5, 0.3, 1.0, fac.m_size());
        let gs = good_sets(&fac, &c, Some(&f)).unwrap();
        assert!(gs.preconditions.pass());
        assert!(gs.pass(), "{:?}", gs.items);
        let ideal = idealized_outcome(&fac, &c).unwrap();
        assert!(ideal.asserted && ideal.bound.pass);
        assert!(ideal.l1_outputs <= ideal.l1_messages + 1e-15);
    }

    #[test]
    fn information_violation_is_reported() {
        let (f, p) = make_family("EQ", 2).unwrap();
        let fac = factorize(&ProtocolTree::send_then_answer(&f).unwrap(), &p).unwrap();
        // I(X:M|Y) = 2 bits here, above c = 1.
        let err = good_sets(&fac, &cfg(1.0, 0.3, 1.0, fac.m_size()), None).unwrap_err();
        assert!(matches!(err, Error::Precondition(ref s) if s.contains("I(X:M|Y)")));
    }

    #[test]
    fn clipped_weights_shrink_normalizer() {
        // u_x(1) = 1 for x = 1 but v_y(1) is tiny under this p, so m = 1 is
        // outside G_xy once 2^Δ is small.
        let p = Distribution::new(2, 1, vec![0.99, 0.01]).unwrap();
        let fac = TranscriptFactorization::new(p, vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 1.0], vec![0, 0], 1).unwrap();
        let c = make_config(1.0, 0.3, 1.0, 2, true, Overrides { delta: Some(1.0), ..Default::default() }).unwrap();
        let ideal = idealized_outcome(&fac, &c).unwrap();
        assert!(ideal.normalizer < 1.0);
        let direct: f64 = (0..2).map(|x| fac.p().prob(x, 0) * ideal.w[x * 2..x * 2 + 2].iter().sum::<f64>()).sum();
        assert!((ideal.normalizer - direct).abs() < 1e-15);
        // w ≤ u_x·u_y everywhere, with equality on G_xy.
        let d = derived_quantities(&fac);
        for x in 0..2 {
            for m in 0..2 {
                let uu = fac.ux(x, m) * fac.uy(0, m);
                let w = ideal.w[x * 2 + m];
                assert!(w <= uu);
                if in_g_xy(fac.ux(x, m), fac.uy(0, m), d.vx_row(x)[m], d.vy_row(0)[m], c.two_delta()) {
                    assert_eq!(w, uu);
                }
            }
        }
    }
}
