use serde::Serialize;

use crate::protocols::TranscriptFactorization;

/// The normalizers and conditional message laws of a factorization.
///
/// Entries that condition on a zero-probability input are 0 and listed in
/// `undefined_x` / `undefined_y`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivedQuantities {
    pub x_size: usize,
    pub y_size: usize,
    pub m_size: usize,
    pub q: f64,
    /// `α_xy = Σ_m u_x(m)·u_y(m)`, row-major over `X × Y`.
    pub alpha_xy: Vec<f64>,
    /// `α_x = Σ_y p(y|x)·α_xy`.
    pub alpha_x: Vec<f64>,
    /// `α_y = Σ_x p(x|y)·α_xy`.
    pub alpha_y: Vec<f64>,
    /// `v_x(m) = Σ_y p(y|x)·u_y(m)`, row-major over `X × M`.
    pub vx: Vec<f64>,
    /// `v_y(m) = Σ_x p(x|y)·u_x(m)`, row-major over `Y × M`.
    pub vy: Vec<f64>,
    pub undefined_x: Vec<usize>,
    pub undefined_y: Vec<usize>,
}

pub fn derived_quantities(fac: &TranscriptFactorization) -> DerivedQuantities {
    let (nx, ny, nm) = (fac.x_size(), fac.y_size(), fac.m_size());
    let p = fac.p();
    let mut alpha_xy = vec![0.0; nx * ny];
    for x in 0..nx {
        for y in 0..ny {
            alpha_xy[x * ny + y] = fac.ux_row(x).iter().zip(fac.uy_row(y)).map(|(a, b)| a * b).sum();
        }
    }
    let mut alpha_x = vec![0.0; nx];
    let mut vx = vec![0.0; nx * nm];
    let mut undefined_x = Vec::new();
    for x in 0..nx {
        let Some(cond) = p.cond_y_given_x(x) else {
            undefined_x.push(x);
            continue;
        };
        for (y, &w) in cond.iter().enumerate() {
            alpha_x[x] += w * alpha_xy[x * ny + y];
            for (v, &u) in vx[x * nm..(x + 1) * nm].iter_mut().zip(fac.uy_row(y)) {
                *v += w * u;
            }
        }
    }
    let mut alpha_y = vec![0.0; ny];
    let mut vy = vec![0.0; ny * nm];
    let mut undefined_y = Vec::new();
    for y in 0..ny {
        let Some(cond) = p.cond_x_given_y(y) else {
            undefined_y.push(y);
            continue;
        };
        for (x, &w) in cond.iter().enumerate() {
            alpha_y[y] += w * alpha_xy[x * ny + y];
            for (v, &u) in vy[y * nm..(y + 1) * nm].iter_mut().zip(fac.ux_row(x)) {
                *v += w * u;
            }
        }
    }
    DerivedQuantities { x_size: nx, y_size: ny, m_size: nm, q: fac.q(), alpha_xy, alpha_x, alpha_y, vx, vy, undefined_x, undefined_y }
}

impl DerivedQuantities {
    pub fn alpha_xy(&self, x: usize, y: usize) -> f64 {
        self.alpha_xy[x * self.y_size + y]
    }

    pub fn vx_row(&self, x: usize) -> &[f64] {
        &self.vx[x * self.m_size..(x + 1) * self.m_size]
    }

    pub fn vy_row(&self, y: usize) -> &[f64] {
        &self.vy[y * self.m_size..(y + 1) * self.m_size]
    }

    /// `Pr[M_xy = m] = u_x(m)u_y(m)/α_xy`; `None` when `α_xy = 0`.
    pub fn m_xy(&self, fac: &TranscriptFactorization, x: usize, y: usize) -> Option<Vec<f64>> {
        let a = self.alpha_xy(x, y);
        (a > 0.0).then(|| fac.ux_row(x).iter().zip(fac.uy_row(y)).map(|(u, v)| u * v / a).collect())
    }

    /// `Pr[M_x = m] = u_x(m)v_x(m)/α_x`.
    pub fn m_x(&self, fac: &TranscriptFactorization, x: usize) -> Option<Vec<f64>> {
        let a = self.alpha_x[x];
        (a > 0.0).then(|| fac.ux_row(x).iter().zip(self.vx_row(x)).map(|(u, v)| u * v / a).collect())
    }

    /// `Pr[M_y = m] = u_y(m)v_y(m)/α_y`.
    pub fn m_y(&self, fac: &TranscriptFactorization, y: usize) -> Option<Vec<f64>> {
        let a = self.alpha_y[y];
        (a > 0.0).then(|| fac.uy_row(y).iter().zip(self.vy_row(y)).map(|(u, v)| u * v / a).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_family, Distribution};
    use crate::protocols::{factorize, ProtocolTree};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_instance() {
        let fac = TranscriptFactorization::new(Distribution::uniform(2, 2), vec![1.0; 2], vec![1.0; 2], vec![0], 2).unwrap();
        let d = derived_quantities(&fac);
        assert!(d.alpha_xy.iter().chain(&d.alpha_x).chain(&d.alpha_y).all(|&a| a == 1.0));
        assert_eq!(d.m_xy(&fac, 1, 0).unwrap(), vec![1.0]);
    }

    #[test]
    fn alice_sends_x_has_unit_normalizers() {
        let (f, p) = make_family("AND", 1).unwrap();
        let fac = factorize(&ProtocolTree::send_then_answer(&f).unwrap(), &p).unwrap();
        let d = derived_quantities(&fac);
        assert!(d.alpha_xy.iter().all(|&a| a == 1.0));
    }

    #[test]
    fn message_laws_match_joint_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let p = Distribution::from_weights(3, 3, (0..9).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
            let m = 5;
            let ux: Vec<f64> = (0..3 * m).map(|_| rng.gen_range(0.0..1.0)).collect();
            let uy: Vec<f64> = (0..3 * m).map(|_| rng.gen_range(0.0..1.0)).collect();
            let fac = TranscriptFactorization::new(p, ux, uy, vec![0; m], 1).unwrap();
            let d = derived_quantities(&fac);
            let joint = fac.joint().unwrap();
            let m_given_x = joint.conditionals(&["M"], &["X"]).unwrap();
            let m_given_y = joint.conditionals(&["M"], &["Y"]).unwrap();
            let m_given_xy = joint.conditionals(&["M"], &["X", "Y"]).unwrap();
            let px = joint.marginal(&["X"]).unwrap();
            for x in 0..3 {
                let want = m_given_x[x].as_ref().unwrap();
                let got = d.m_x(&fac, x).unwrap();
                assert!(want.iter().zip(&got).all(|(a, b)| (a - b).abs() < 1e-12));
                // Pr[X = x] = p(x)·α_x/q.
                let marg = fac.p().marginal_x()[x] * d.alpha_x[x] / d.q;
                assert!((px.probs()[x] - marg).abs() < 1e-12);
                for y in 0..3 {
                    let want = m_given_xy[x * 3 + y].as_ref().unwrap();
                    let got = d.m_xy(&fac, x, y).unwrap();
                    assert!(want.iter().zip(&got).all(|(a, b)| (a - b).abs() < 1e-12));
                }
            }
            for y in 0..3 {
                let want = m_given_y[y].as_ref().unwrap();
                let got = d.m_y(&fac, y).unwrap();
                assert!(want.iter().zip(&got).all(|(a, b)| (a - b).abs() < 1e-12));
            }
        }
    }
}
