use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{checked_pow, output_bits, Relation};
use crate::error::{invalid, Error, Result};

/// Trees with more leaves than this are rejected.
pub const MAX_LEAVES: usize = 1 << 16;
/// Longest transcript (path plus padding), in bits.
pub const MAX_TRANSCRIPT_BITS: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Owner {
    Alice,
    Bob,
}

/// JSON shape of a tree node. Internal nodes carry the owner's bit for every
/// one of that player's inputs; leaves carry their full transcript, whose
/// prefix must be the path from the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Internal { owner: Owner, table: Vec<u8>, children: Box<[Node; 2]> },
    Leaf { transcript: String },
}

impl Node {
    pub fn leaf(transcript: impl Into<String>) -> Node {
        Node::Leaf { transcript: transcript.into() }
    }

    pub fn alice(table: Vec<u8>, zero: Node, one: Node) -> Node {
        Node::Internal { owner: Owner::Alice, table, children: Box::new([zero, one]) }
    }

    pub fn bob(table: Vec<u8>, zero: Node, one: Node) -> Node {
        Node::Internal { owner: Owner::Bob, table, children: Box::new([zero, one]) }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Flat {
    Internal { owner: Owner, table: Vec<u8>, child: [usize; 2] },
    Leaf(usize),
}

/// A leaf of a validated tree.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Leaf {
    /// Root-to-leaf bits followed by padding.
    pub transcript: String,
    pub depth: usize,
    pub output: usize,
}

/// A deterministic two-party protocol. Leaves are numbered in depth-first
/// order (child 0 before child 1); that index is the transcript `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolTree {
    x_size: usize,
    y_size: usize,
    z_size: usize,
    root: Node,
    flat: Vec<Flat>,
    leaves: Vec<Leaf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RunResult {
    pub leaf: usize,
    pub output: usize,
}

impl ProtocolTree {
    pub fn new(x_size: usize, y_size: usize, z_size: usize, root: Node) -> Result<Self> {
        if x_size == 0 || y_size == 0 || z_size == 0 {
            return Err(invalid("protocol dimensions must be positive"));
        }
        let k = output_bits(z_size) as usize;
        let mut flat = Vec::new();
        let mut leaves = Vec::new();
        let mut path = String::new();
        flatten(&root, x_size, y_size, z_size, k, &mut path, &mut flat, &mut leaves)?;
        Ok(ProtocolTree { x_size, y_size, z_size, root, flat, leaves })
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn z_size(&self) -> usize {
        self.z_size
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Longest transcript in bits, i.e. the worst-case communication.
    pub fn cost(&self) -> usize {
        self.leaves.iter().map(|l| l.transcript.len()).max().unwrap_or(0)
    }

    pub fn run(&self, x: usize, y: usize) -> Result<RunResult> {
        if x >= self.x_size || y >= self.y_size {
            return Err(invalid(format!("input ({x}, {y}) outside {}×{}", self.x_size, self.y_size)));
        }
        let mut at = 0;
        loop {
            match &self.flat[at] {
                Flat::Leaf(i) => return Ok(RunResult { leaf: *i, output: self.leaves[*i].output }),
                Flat::Internal { owner, table, child } => {
                    let bit = match owner {
                        Owner::Alice => table[x],
                        Owner::Bob => table[y],
                    };
                    at = child[bit as usize];
                }
            }
        }
    }

    /// For every leaf, the inputs of each player consistent with its path:
    /// `(alice[leaf][x], bob[leaf][y])`.
    pub(crate) fn consistency(&self) -> (Vec<Vec<bool>>, Vec<Vec<bool>>) {
        let mut alice = vec![Vec::new(); self.leaves.len()];
        let mut bob = vec![Vec::new(); self.leaves.len()];
        let mut stack = vec![(0usize, vec![true; self.x_size], vec![true; self.y_size])];
        while let Some((at, a, b)) = stack.pop() {
            match &self.flat[at] {
                Flat::Leaf(i) => {
                    alice[*i] = a;
                    bob[*i] = b;
                }
                Flat::Internal { owner, table, child } => {
                    for bit in 0..2u8 {
                        let (mut a2, mut b2) = (a.clone(), b.clone());
                        match owner {
                            Owner::Alice => a2.iter_mut().zip(table).for_each(|(v, &t)| *v &= t == bit),
                            Owner::Bob => b2.iter_mut().zip(table).for_each(|(v, &t)| *v &= t == bit),
                        }
                        stack.push((child[bit as usize], a2, b2));
                    }
                }
            }
        }
        (alice, bob)
    }

    /// A tree with no communication that outputs `z` (the output bits are
    /// padding).
    pub fn constant(x_size: usize, y_size: usize, z_size: usize, z: usize) -> Result<Self> {
        if z >= z_size {
            return Err(invalid(format!("output {z} outside 0..{z_size}")));
        }
        let k = output_bits(z_size) as usize;
        ProtocolTree::new(x_size, y_size, z_size, Node::leaf(encode(z, k)))
    }

    /// Alice sends her input in binary, then Bob sends the smallest output
    /// accepted on `(x, y)`.
    pub fn send_then_answer(f: &Relation) -> Result<Self> {
        let (nx, ny) = (f.x_size(), f.y_size());
        let xb = output_bits(nx) as usize;
        let k = output_bits(f.z_size()) as usize;
        let answer = |x: usize| -> Result<Vec<usize>> {
            (0..ny)
                .map(|y| f.outputs(x, y).first().map(|&z| z as usize).ok_or_else(|| invalid(format!("no accepted output on ({x}, {y})"))))
                .collect()
        };
        // Bob's subtree for a known x: k bits spelling out the answer. Paths
        // spelling an output outside Z are unreachable; their leaves pad with
        // output 0 so the tree stays well formed.
        fn bob_bits(values: &[usize], nz: usize, k: usize, depth: usize, prefix: usize) -> Node {
            if depth == k {
                return Node::leaf(if prefix < nz { String::new() } else { encode(0, k) });
            }
            let shift = k - 1 - depth;
            let table = values.iter().map(|&z| (z >> shift & 1) as u8).collect();
            Node::bob(table, bob_bits(values, nz, k, depth + 1, prefix << 1), bob_bits(values, nz, k, depth + 1, prefix << 1 | 1))
        }
        fn alice_bits(nx: usize, xb: usize, depth: usize, prefix: usize, leaf: &dyn Fn(usize) -> Node) -> Node {
            if depth == xb {
                return leaf(prefix);
            }
            let shift = xb - 1 - depth;
            let table = (0..nx).map(|x| (x >> shift & 1) as u8).collect();
            Node::alice(table, alice_bits(nx, xb, depth + 1, prefix << 1, leaf), alice_bits(nx, xb, depth + 1, prefix << 1 | 1, leaf))
        }
        let mut answers = Vec::with_capacity(nx);
        for x in 0..nx {
            answers.push(answer(x)?);
        }
        let leaf = |x: usize| {
            // Prefixes past |X| are unreachable; answer as for x = 0.
            let values = answers.get(x).unwrap_or(&answers[0]);
            bob_bits(values, f.z_size(), k, 0, 0)
        };
        let root = alice_bits(nx, xb, 0, 0, &leaf);
        ProtocolTree::new(nx, ny, f.z_size(), prepend_paths(root, &mut String::new()))
    }

    /// Runs `coords[0]` on coordinate 0 of the product input, then
    /// `coords[1]` on coordinate 1, and so on; the transcript ends with the
    /// output tuple. Tuples are little-endian in base `|X|`, `|Y|`, `|Z|` as
    /// in [`Relation::product`].
    pub fn sequential_product(coords: &[ProtocolTree]) -> Result<Self> {
        let first = coords.first().ok_or_else(|| invalid("product of zero protocols"))?;
        let (bx, by, bz) = (first.x_size, first.y_size, first.z_size);
        if coords.iter().any(|c| (c.x_size, c.y_size, c.z_size) != (bx, by, bz)) {
            return Err(Error::DimensionMismatch("coordinate protocols differ in shape".into()));
        }
        let t = coords.len();
        let pow = |b: usize| checked_pow(b, t);
        let (nx, ny, nz) = (pow(bx)?, pow(by)?, pow(bz)?);
        let k = output_bits(nz) as usize;
        let digit = |v: usize, base: usize, i: usize| v / base.pow(i as u32) % base;

        #[allow(clippy::type_complexity)]
        fn lift(
            coords: &[ProtocolTree],
            i: usize,
            at: usize,
            outputs: &mut Vec<usize>,
            ctx: &dyn Fn(&[usize]) -> Node,
            lifted_table: &dyn Fn(usize, Owner, &[u8]) -> Vec<u8>,
        ) -> Node {
            if i == coords.len() {
                return ctx(outputs);
            }
            match &coords[i].flat[at] {
                Flat::Leaf(l) => {
                    outputs.push(coords[i].leaves[*l].output);
                    let node = lift(coords, i + 1, 0, outputs, ctx, lifted_table);
                    outputs.pop();
                    node
                }
                Flat::Internal { owner, table, child } => {
                    let t = lifted_table(i, *owner, table);
                    let zero = lift(coords, i, child[0], outputs, ctx, lifted_table);
                    let one = lift(coords, i, child[1], outputs, ctx, lifted_table);
                    Node::Internal { owner: *owner, table: t, children: Box::new([zero, one]) }
                }
            }
        }
        let leaf_for = |outputs: &[usize]| {
            let z = outputs.iter().rev().fold(0usize, |acc, &o| acc * bz + o);
            // The path part is filled in below.
            Node::leaf(encode(z, k))
        };
        let lifted = |i: usize, owner: Owner, table: &[u8]| match owner {
            Owner::Alice => (0..nx).map(|x| table[digit(x, bx, i)]).collect(),
            Owner::Bob => (0..ny).map(|y| table[digit(y, by, i)]).collect(),
        };
        let mut outputs = Vec::with_capacity(t);
        let root = lift(coords, 0, 0, &mut outputs, &leaf_for, &lifted);
        ProtocolTree::new(nx, ny, nz, prepend_paths(root, &mut String::new()))
    }

    /// `t` copies of `base` sharing one communication budget. Before
    /// coordinate `i` (0-based) the allowance is `⌊fraction·(i+1)·d⌋` bits,
    /// where `d` is the deepest path of `base`; the coordinate is solved with
    /// `base` when the unspent allowance covers `d`, and answered with the
    /// constant `guess` otherwise. A coordinate's treatment never depends on
    /// `t`, and the total spent never exceeds `⌊fraction·t·d⌋`.
    pub fn shared_budget_product(base: &ProtocolTree, t: usize, fraction: f64, guess: usize) -> Result<Self> {
        if t == 0 {
            return Err(invalid("product of zero protocols"));
        }
        if !(fraction >= 0.0) || !fraction.is_finite() {
            return Err(invalid(format!("budget fraction {fraction} must be finite and non-negative")));
        }
        if guess >= base.z_size {
            return Err(invalid(format!("guess {guess} outside 0..{}", base.z_size)));
        }
        let (nx, ny, nz) = (checked_pow(base.x_size, t)?, checked_pow(base.y_size, t)?, checked_pow(base.z_size, t)?);
        let k = output_bits(nz) as usize;
        let d = base.depth();

        struct Ctx<'a> {
            base: &'a ProtocolTree,
            t: usize,
            fraction: f64,
            guess: usize,
            d: usize,
            nx: usize,
            ny: usize,
            k: usize,
        }
        // `at` is the current node of `base` while coordinate `i` runs.
        fn go(c: &Ctx, i: usize, at: Option<usize>, spent: usize, outputs: &mut Vec<usize>) -> Node {
            if i == c.t {
                let z = outputs.iter().rev().fold(0usize, |acc, &o| acc * c.base.z_size + o);
                return Node::leaf(encode(z, c.k));
            }
            let Some(at) = at else {
                if budget_allowance(c.fraction, i, c.d).saturating_sub(spent) >= c.d {
                    return go(c, i, Some(0), spent, outputs);
                }
                outputs.push(c.guess);
                let node = go(c, i + 1, None, spent, outputs);
                outputs.pop();
                return node;
            };
            match &c.base.flat[at] {
                Flat::Leaf(l) => {
                    let leaf = &c.base.leaves[*l];
                    outputs.push(leaf.output);
                    let node = go(c, i + 1, None, spent + leaf.depth, outputs);
                    outputs.pop();
                    node
                }
                Flat::Internal { owner, table, child } => {
                    let (n, base_n) = match owner {
                        Owner::Alice => (c.nx, c.base.x_size),
                        Owner::Bob => (c.ny, c.base.y_size),
                    };
                    let lifted = (0..n).map(|v| table[v / base_n.pow(i as u32) % base_n]).collect();
                    let zero = go(c, i, Some(child[0]), spent, outputs);
                    let one = go(c, i, Some(child[1]), spent, outputs);
                    Node::Internal { owner: *owner, table: lifted, children: Box::new([zero, one]) }
                }
            }
        }
        let ctx = Ctx { base, t, fraction, guess, d, nx, ny, k };
        let root = go(&ctx, 0, None, 0, &mut Vec::with_capacity(t));
        ProtocolTree::new(nx, ny, nz, prepend_paths(root, &mut String::new()))
    }

    /// Deepest root-to-leaf path, i.e. the bits exchanged before the output.
    pub fn depth(&self) -> usize {
        self.leaves.iter().map(|l| l.depth).max().unwrap_or(0)
    }

    /// A random tree of the given depth whose node functions are uniform;
    /// every leaf pads its path with a uniform output.
    pub fn random<R: Rng + ?Sized>(x_size: usize, y_size: usize, z_size: usize, depth: usize, rng: &mut R) -> Result<Self> {
        let k = output_bits(z_size) as usize;
        fn grow<R: Rng + ?Sized>(nx: usize, ny: usize, nz: usize, k: usize, depth: usize, path: &mut String, rng: &mut R) -> Node {
            if depth == 0 {
                return Node::leaf(format!("{path}{}", encode(rng.gen_range(0..nz), k)));
            }
            let owner = if rng.gen_bool(0.5) { Owner::Alice } else { Owner::Bob };
            let n = if owner == Owner::Alice { nx } else { ny };
            let table = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
            path.push('0');
            let zero = grow(nx, ny, nz, k, depth - 1, path, rng);
            path.pop();
            path.push('1');
            let one = grow(nx, ny, nz, k, depth - 1, path, rng);
            path.pop();
            Node::Internal { owner, table, children: Box::new([zero, one]) }
        }
        let root = grow(x_size, y_size, z_size, k, depth, &mut String::new(), rng);
        ProtocolTree::new(x_size, y_size, z_size, root)
    }
}

/// Bits available to the first `i + 1` coordinates of a shared-budget
/// product: `⌊fraction·(i+1)·d⌋`.
pub fn budget_allowance(fraction: f64, i: usize, d: usize) -> usize {
    // The slack keeps products like 0.7·10 from flooring to 6.
    (fraction * (i + 1) as f64 * d as f64 + 1e-9).floor() as usize
}

/// `z` as `k` big-endian bits.
pub(crate) fn encode(z: usize, k: usize) -> String {
    (0..k).rev().map(|i| if z >> i & 1 == 1 { '1' } else { '0' }).collect()
}

/// Prefixes every leaf's padding with its path.
fn prepend_paths(node: Node, path: &mut String) -> Node {
    match node {
        Node::Leaf { transcript } => Node::leaf(format!("{path}{transcript}")),
        Node::Internal { owner, table, children } => {
            let [zero, one] = *children;
            path.push('0');
            let zero = prepend_paths(zero, path);
            path.pop();
            path.push('1');
            let one = prepend_paths(one, path);
            path.pop();
            Node::Internal { owner, table, children: Box::new([zero, one]) }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn flatten(
    node: &Node,
    nx: usize,
    ny: usize,
    nz: usize,
    k: usize,
    path: &mut String,
    flat: &mut Vec<Flat>,
    leaves: &mut Vec<Leaf>,
) -> Result<usize> {
    let at = flat.len();
    match node {
        Node::Leaf { transcript } => {
            if transcript.chars().any(|c| c != '0' && c != '1') {
                return Err(Error::MalformedTree(format!("transcript `{transcript}` is not a bit string")));
            }
            if !transcript.starts_with(path.as_str()) {
                return Err(Error::MalformedTree(format!("leaf transcript `{transcript}` does not extend its path `{path}`")));
            }
            if transcript.len() < k {
                return Err(Error::MalformedTree(format!("transcript `{transcript}` is shorter than the {k} output bits")));
            }
            if transcript.len() > MAX_TRANSCRIPT_BITS {
                return Err(Error::SizeCap(format!("transcript longer than {MAX_TRANSCRIPT_BITS} bits")));
            }
            let tail = &transcript[transcript.len() - k..];
            let output = if k == 0 { 0 } else { usize::from_str_radix(tail, 2).expect("bit string") };
            if output >= nz {
                return Err(Error::MalformedTree(format!("leaf `{transcript}` encodes output {output} outside 0..{nz}")));
            }
            if leaves.len() >= MAX_LEAVES {
                return Err(Error::SizeCap(format!("more than {MAX_LEAVES} leaves")));
            }
            flat.push(Flat::Leaf(leaves.len()));
            leaves.push(Leaf { transcript: transcript.clone(), depth: path.len(), output });
        }
        Node::Internal { owner, table, children } => {
            let expected = if *owner == Owner::Alice { nx } else { ny };
            if table.len() != expected {
                return Err(Error::MalformedTree(format!(
                    "{owner:?} node at `{path}` has a table of {} entries, expected {expected}",
                    table.len()
                )));
            }
            if table.iter().any(|&b| b > 1) {
                return Err(Error::MalformedTree(format!("node at `{path}` has a non-bit table entry")));
            }
            if path.len() >= MAX_TRANSCRIPT_BITS {
                return Err(Error::SizeCap(format!("tree deeper than {MAX_TRANSCRIPT_BITS}")));
            }
            flat.push(Flat::Internal { owner: *owner, table: table.clone(), child: [0, 0] });
            let mut child = [0; 2];
            for (bit, c) in children.iter().enumerate() {
                path.push(if bit == 0 { '0' } else { '1' });
                child[bit] = flatten(c, nx, ny, nz, k, path, flat, leaves)?;
                path.pop();
            }
            if let Flat::Internal { child: slot, .. } = &mut flat[at] {
                *slot = child;
            }
        }
    }
    Ok(at)
}

#[derive(Serialize, Deserialize)]
struct TreeJson {
    x_size: usize,
    y_size: usize,
    z_size: usize,
    root: Node,
}

impl Serialize for ProtocolTree {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TreeJson { x_size: self.x_size, y_size: self.y_size, z_size: self.z_size, root: self.root.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProtocolTree {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = TreeJson::deserialize(d)?;
        ProtocolTree::new(raw.x_size, raw.y_size, raw.z_size, raw.root).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_family;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_tree_always_outputs_its_value() {
        let t = ProtocolTree::constant(3, 2, 3, 2).unwrap();
        for x in 0..3 {
            for y in 0..2 {
                assert_eq!(t.run(x, y).unwrap(), RunResult { leaf: 0, output: 2 });
            }
        }
        assert_eq!(t.leaves()[0].transcript, "10");
        assert_eq!(t.leaves()[0].depth, 0);
    }

    #[test]
    fn alice_sends_x_first() {
        let (f, _) = make_family("AND", 1).unwrap();
        let t = ProtocolTree::send_then_answer(&f).unwrap();
        assert_eq!(t.num_leaves(), 4);
        assert_eq!(t.cost(), 2);
        for x in 0..2 {
            for y in 0..2 {
                let r = t.run(x, y).unwrap();
                assert!(t.leaves()[r.leaf].transcript.starts_with(if x == 0 { '0' } else { '1' }));
                assert_eq!(r.output, x & y);
            }
        }
    }

    #[test]
    fn rejects_bad_trees() {
        let short = Node::alice(vec![0], Node::leaf("0"), Node::leaf("1"));
        assert!(matches!(ProtocolTree::new(2, 2, 2, short), Err(Error::MalformedTree(_))));
        let wrong_path = Node::bob(vec![0, 1], Node::leaf("1"), Node::leaf("1"));
        assert!(matches!(ProtocolTree::new(2, 2, 2, wrong_path), Err(Error::MalformedTree(_))));
        let bad_output = Node::leaf("11");
        assert!(ProtocolTree::new(2, 2, 3, bad_output).is_err());
    }

    #[test]
    fn json_round_trip() {
        let (f, _) = make_family("EQ", 1).unwrap();
        let t = ProtocolTree::send_then_answer(&f).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("\"owner\":\"alice\""));
        let back: ProtocolTree = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        let bad =
            r#"{"x_size":2,"y_size":2,"z_size":2,"root":{"owner":"bob","table":[0],"children":[{"transcript":"0"},{"transcript":"1"}]}}"#;
        assert!(serde_json::from_str::<ProtocolTree>(bad).is_err());
    }

    #[test]
    fn product_runs_each_coordinate() {
        let (f, _) = make_family("AND", 1).unwrap();
        let base = ProtocolTree::send_then_answer(&f).unwrap();
        let guess = ProtocolTree::constant(2, 2, 2, 0).unwrap();
        let p = ProtocolTree::sequential_product(&[base.clone(), guess]).unwrap();
        assert_eq!((p.x_size(), p.y_size(), p.z_size()), (4, 4, 4));
        assert_eq!(p.cost(), 4);
        let f2 = f.product(2).unwrap();
        for x in 0..4 {
            for y in 0..4 {
                let z = p.run(x, y).unwrap().output;
                assert_eq!(z % 2, (x % 2) & (y % 2));
                assert_eq!(z / 2, 0);
                let both = ProtocolTree::sequential_product(&[base.clone(), base.clone()]).unwrap();
                assert!(f2.accepts(x, y, both.run(x, y).unwrap().output));
            }
        }
    }

    #[test]
    fn random_trees_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let t = ProtocolTree::random(4, 4, 3, 3, &mut rng).unwrap();
            assert_eq!(t.num_leaves(), 8);
            let (a, b) = t.consistency();
            for x in 0..4 {
                for y in 0..4 {
                    let leaf = t.run(x, y).unwrap().leaf;
                    let reached: Vec<usize> = (0..8).filter(|&m| a[m][x] && b[m][y]).collect();
                    assert_eq!(reached, vec![leaf]);
                }
            }
        }
    }
}
