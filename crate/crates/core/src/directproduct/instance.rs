use crate::domain::{checked_pow, digits, Distribution, Relation};
use crate::error::{invalid, Error, Result};
use crate::infotheory::JointTable;
use crate::protocols::ProtocolTree;

/// `δ₁ = ε²/32`, the per-coordinate budget constant of the direct product
/// argument.
pub fn delta1_for(eps: f64) -> f64 {
    eps * eps / 32.0
}

/// A protocol for `f^t` on inputs drawn from `μ^t`. Coordinates are numbered
/// `1..=t`; tuples are little-endian as in [`Relation::product`].
#[derive(Clone, Debug)]
pub struct ProductInstance {
    f: Relation,
    mu: Distribution,
    t: usize,
    tree: ProtocolTree,
    product: Distribution,
}

/// One product input with positive mass and what the protocol does on it.
pub(crate) struct Run {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub p: f64,
    pub leaf: usize,
    /// `T_i` for each coordinate.
    pub success: Vec<bool>,
}

impl ProductInstance {
    pub fn new(f: Relation, mu: Distribution, t: usize, tree: ProtocolTree) -> Result<Self> {
        if t == 0 {
            return Err(invalid("t must be positive"));
        }
        if f.x_size() != mu.x_size() || f.y_size() != mu.y_size() {
            return Err(Error::DimensionMismatch("relation and distribution shapes differ".into()));
        }
        let shape = (checked_pow(f.x_size(), t)?, checked_pow(f.y_size(), t)?, checked_pow(f.z_size(), t)?);
        if (tree.x_size(), tree.y_size(), tree.z_size()) != shape {
            return Err(Error::DimensionMismatch(format!(
                "protocol is {}×{}→{}, expected {}×{}→{} for t = {t}",
                tree.x_size(),
                tree.y_size(),
                tree.z_size(),
                shape.0,
                shape.1,
                shape.2
            )));
        }
        let product = mu.product(t)?;
        Ok(ProductInstance { f, mu, t, tree, product })
    }

    /// `t` independent copies of `base`, run one after another.
    pub fn independent(f: Relation, mu: Distribution, t: usize, base: &ProtocolTree) -> Result<Self> {
        let tree = ProtocolTree::sequential_product(&vec![base.clone(); t])?;
        Self::new(f, mu, t, tree)
    }

    /// `t` copies of `base` under a shared budget, see
    /// [`ProtocolTree::shared_budget_product`]. Unfunded coordinates answer
    /// with [`best_guess`].
    pub fn shared_budget(f: Relation, mu: Distribution, t: usize, base: &ProtocolTree, fraction: f64) -> Result<Self> {
        let guess = best_guess(&f, &mu);
        let tree = ProtocolTree::shared_budget_product(base, t, fraction, guess)?;
        Self::new(f, mu, t, tree)
    }

    pub fn relation(&self) -> &Relation {
        &self.f
    }

    pub fn base_distribution(&self) -> &Distribution {
        &self.mu
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn tree(&self) -> &ProtocolTree {
        &self.tree
    }

    pub fn product_distribution(&self) -> &Distribution {
        &self.product
    }

    /// Size of the range used for `U_i`, which holds either `x_i` or `y_i`.
    pub(crate) fn u_size(&self) -> usize {
        self.f.x_size().max(self.f.y_size())
    }

    pub(crate) fn output_digits(&self, leaf: usize) -> Vec<usize> {
        let mut z = vec![0; self.t];
        digits(self.tree.leaves()[leaf].output, self.f.z_size(), &mut z);
        z
    }

    pub(crate) fn runs(&self) -> Result<Vec<Run>> {
        let (nx, ny) = (self.product.x_size(), self.product.y_size());
        let mut out = Vec::new();
        for xt in 0..nx {
            for yt in 0..ny {
                let p = self.product.prob(xt, yt);
                if p == 0.0 {
                    continue;
                }
                let mut x = vec![0; self.t];
                let mut y = vec![0; self.t];
                digits(xt, self.f.x_size(), &mut x);
                digits(yt, self.f.y_size(), &mut y);
                let leaf = self.tree.run(xt, yt)?.leaf;
                let z = self.output_digits(leaf);
                let success = (0..self.t).map(|i| self.f.accepts(x[i], y[i], z[i])).collect();
                out.push(Run { x, y, p, leaf, success });
            }
        }
        Ok(out)
    }

    pub(crate) fn check_coordinates(&self, coords: &[usize]) -> Result<()> {
        for (k, &i) in coords.iter().enumerate() {
            if i == 0 || i > self.t {
                return Err(invalid(format!("coordinate {i} outside 1..={}", self.t)));
            }
            if coords[..k].contains(&i) {
                return Err(invalid(format!("coordinate {i} listed twice")));
            }
        }
        Ok(())
    }
}

/// The output accepted on the most `μ`-mass; ties go to the smaller symbol.
pub fn best_guess(f: &Relation, mu: &Distribution) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for z in 0..f.z_size() {
        let mut mass = 0.0;
        for x in 0..f.x_size() {
            for y in 0..f.y_size() {
                if f.accepts(x, y, z) {
                    mass += mu.prob(x, y);
                }
            }
        }
        if mass > best.1 {
            best = (z, mass);
        }
    }
    best.0
}

pub(crate) fn var(prefix: &str, i: usize) -> String {
    format!("{prefix}{i}")
}

pub(crate) fn refs(names: &[String]) -> Vec<&str> {
    names.iter().map(String::as_str).collect()
}

/// The exact joint of `X`, `Y`, `M` and the success bits `T_1 … T_t`.
#[derive(Clone, Debug)]
pub struct SuccessVariables {
    t: usize,
    joint: JointTable,
}

impl SuccessVariables {
    /// Variables `X`, `Y` (product indices), `M` (leaf) and `T1 … Tt`.
    pub fn joint(&self) -> &JointTable {
        &self.joint
    }

    /// `Pr[T_i = 1 for every i in coords]`; 1 for the empty set.
    pub fn pr_success(&self, coords: &[usize]) -> Result<f64> {
        if coords.is_empty() {
            return Ok(1.0);
        }
        if let Some(&i) = coords.iter().find(|&&i| i == 0 || i > self.t) {
            return Err(invalid(format!("coordinate {i} outside 1..={}", self.t)));
        }
        let names: Vec<String> = coords.iter().map(|&i| var("T", i)).collect();
        let m = self.joint.marginal(&refs(&names))?;
        // The all-ones cell is the last one.
        Ok(*m.probs().last().expect("non-empty table"))
    }
}

pub fn success_variables(inst: &ProductInstance) -> Result<SuccessVariables> {
    let (nx, ny, nm) = (inst.product.x_size(), inst.product.y_size(), inst.tree.num_leaves());
    let t = inst.t;
    let cells = nx.saturating_mul(ny).saturating_mul(nm).saturating_mul(1 << t.min(40));
    if cells > crate::infotheory::MAX_SUPPORT {
        return Err(Error::SizeCap(format!("|X|^t·|Y|^t·|M|·2^t = {cells} exceeds {}", crate::infotheory::MAX_SUPPORT)));
    }
    let mut probs = vec![0.0; cells];
    let xt_of = |r: &Run| r.x.iter().rev().fold(0, |acc, &v| acc * inst.f.x_size() + v);
    let yt_of = |r: &Run| r.y.iter().rev().fold(0, |acc, &v| acc * inst.f.y_size() + v);
    for r in inst.runs()? {
        let bits = r.success.iter().fold(0usize, |acc, &s| acc << 1 | s as usize);
        let idx = ((xt_of(&r) * ny + yt_of(&r)) * nm + r.leaf) << t | bits;
        probs[idx] += r.p;
    }
    let mut names = vec![("X".to_string(), nx), ("Y".to_string(), ny), ("M".to_string(), nm)];
    names.extend((1..=t).map(|i| (var("T", i), 2)));
    let vars: Vec<(&str, usize)> = names.iter().map(|(n, s)| (n.as_str(), *s)).collect();
    Ok(SuccessVariables { t, joint: JointTable::new(&vars, probs)? })
}

/// Variables of the coordinate-level joint, in table order.
pub(crate) struct Layout {
    pub names: Vec<String>,
    pub sizes: Vec<usize>,
}

impl Layout {
    pub(crate) fn new(inst: &ProductInstance) -> Layout {
        let t = inst.t;
        let mut names = Vec::new();
        let mut sizes = Vec::new();
        for (prefix, size) in [("X", inst.f.x_size()), ("Y", inst.f.y_size()), ("D", 2), ("U", inst.u_size())] {
            for i in 1..=t {
                names.push(var(prefix, i));
                sizes.push(size);
            }
        }
        names.push("M".into());
        sizes.push(inst.tree.num_leaves());
        Layout { names, sizes }
    }
}

/// Joint of `X_1…X_t Y_1…Y_t D_1…D_t U_1…U_t M` with `D` uniform and
/// independent of `XY`, and `U_i = X_i` if `D_i = 0`, else `Y_i`;
/// conditioned on `T_i = 1` for every `i ∈ cond`. Also returns the
/// probability of the conditioning event.
pub(crate) fn coordinate_joint(inst: &ProductInstance, cond: &[usize]) -> Result<(JointTable, f64)> {
    inst.check_coordinates(cond)?;
    let t = inst.t;
    let layout = Layout::new(inst);
    let total = layout
        .sizes
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s).filter(|&v| v <= crate::infotheory::MAX_SUPPORT))
        .ok_or_else(|| Error::SizeCap(format!("coordinate joint exceeds {} cells", crate::infotheory::MAX_SUPPORT)))?;
    let mut strides = vec![1usize; layout.sizes.len()];
    for k in (0..strides.len() - 1).rev() {
        strides[k] = strides[k + 1] * layout.sizes[k + 1];
    }
    let mut weights = vec![0.0; total];
    let mut kept = 0.0;
    let d_weight = 0.5f64.powi(t as i32);
    for r in inst.runs()? {
        if cond.iter().any(|&i| !r.success[i - 1]) {
            continue;
        }
        kept += r.p;
        let base: usize = (0..t).map(|i| r.x[i] * strides[i] + r.y[i] * strides[t + i]).sum::<usize>() + r.leaf;
        for d in 0..1usize << t {
            let mut idx = base;
            for i in 0..t {
                let di = d >> i & 1;
                let u = if di == 0 { r.x[i] } else { r.y[i] };
                idx += di * strides[2 * t + i] + u * strides[3 * t + i];
            }
            weights[idx] += r.p * d_weight;
        }
    }
    if kept == 0.0 {
        return Err(Error::NullEvent(format!("Pr[T_i = 1 for i in {cond:?}] = 0")));
    }
    let vars: Vec<(&str, usize)> = layout.names.iter().map(String::as_str).zip(layout.sizes.iter().copied()).collect();
    Ok((JointTable::from_weights(&vars, weights)?, kept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_family;

    #[test]
    fn direction_bits_are_uniform_and_independent() {
        let (f, _) = make_family("EQ", 1).unwrap();
        let mu = Distribution::new(2, 2, vec![0.4, 0.1, 0.2, 0.3]).unwrap();
        let base = ProtocolTree::send_then_answer(&f).unwrap();
        let inst = ProductInstance::shared_budget(f, mu, 2, &base, 0.5).unwrap();
        for cond in [vec![], vec![1]] {
            let (joint, _) = coordinate_joint(&inst, &cond).unwrap();
            let xy = ["X1", "X2", "Y1", "Y2"];
            assert!(joint.mutual_info(&xy, &["D1", "D2"]).unwrap().abs() < 1e-12);
            let d = joint.marginal(&["D1", "D2"]).unwrap();
            assert!(d.probs().iter().all(|p| (p - 0.25).abs() < 1e-12));
            // U_i is X_i or Y_i as D_i says.
            assert!(joint.cond_entropy(&["U1", "U2"], &["X1", "X2", "Y1", "Y2", "D1", "D2"]).unwrap().abs() < 1e-12);
        }
        let (prior, _) = coordinate_joint(&inst, &[]).unwrap();
        let xy = prior.marginal(&["X1", "Y1"]).unwrap();
        assert!((xy.probs()[1] - 0.1).abs() < 1e-12);
    }
}
