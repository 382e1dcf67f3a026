//! Weighted undirected graphs and planted-hierarchy instances.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hctree::{HCTree, NodeId, TreeBuilder};
use crate::util::rng_for;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

/// Undirected graph on vertices `0..n` with canonical edges (`u < v`, sorted,
/// one per pair).
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Graph> {
        let mut out = Vec::new();
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::invalid(format!(
                    "edge ({u}, {v}) out of range for n = {n}"
                )));
            }
            if u == v {
                return Err(Error::invalid(format!("self-loop at vertex {u}")));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::invalid(format!("bad weight {w} on edge ({u}, {v})")));
            }
            out.push(Edge {
                u: u.min(v),
                v: u.max(v),
                w,
            });
        }
        out.sort_by_key(|e| (e.u, e.v));
        if let Some(pair) = out.windows(2).find(|p| (p[0].u, p[0].v) == (p[1].u, p[1].v)) {
            return Err(Error::invalid(format!(
                "duplicate edge ({}, {})",
                pair[0].u, pair[0].v
            )));
        }
        Ok(Graph { n, edges: out })
    }

    pub fn empty(n: usize) -> Graph {
        Graph {
            n,
            edges: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.w).sum()
    }

    /// Subgraph induced on `set`, relabeled to `0..|set|` in the order given.
    /// Returns the map from new labels to old ones.
    pub fn induced_subgraph(&self, set: &[usize]) -> Result<(Graph, Vec<usize>)> {
        if set.is_empty() {
            return Err(Error::invalid("induced subgraph of an empty set"));
        }
        let mut local = vec![usize::MAX; self.n];
        for (i, &v) in set.iter().enumerate() {
            if v >= self.n {
                return Err(Error::UnknownVertex(v));
            }
            if local[v] != usize::MAX {
                return Err(Error::invalid(format!("vertex {v} listed twice")));
            }
            local[v] = i;
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| local[e.u] != usize::MAX && local[e.v] != usize::MAX)
            .map(|e| (local[e.u], local[e.v], e.w));
        Ok((Graph::new(set.len(), edges)?, set.to_vec()))
    }

    /// Dense symmetric weight matrix, row-major.
    pub fn weight_matrix(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n * self.n];
        for e in &self.edges {
            w[e.u * self.n + e.v] = e.w;
            w[e.v * self.n + e.u] = e.w;
        }
        w
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateKind {
    Insert,
    Delete,
}

/// One dynamic-stream event: `w` is added to (insert) or removed from
/// (delete) the weight of the pair `{u, v}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeUpdate {
    pub kind: UpdateKind,
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

impl EdgeUpdate {
    pub fn insert(u: usize, v: usize, w: f64) -> EdgeUpdate {
        EdgeUpdate {
            kind: UpdateKind::Insert,
            u,
            v,
            w,
        }
    }

    pub fn delete(u: usize, v: usize, w: f64) -> EdgeUpdate {
        EdgeUpdate {
            kind: UpdateKind::Delete,
            u,
            v,
            w,
        }
    }

    /// Signed weight change.
    pub fn delta(&self) -> f64 {
        match self.kind {
            UpdateKind::Insert => self.w,
            UpdateKind::Delete => -self.w,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// Recursive split, each uniform over the nontrivial bipartitions.
    #[default]
    Random,
    Balanced,
    /// Depth `n − 1`.
    Caterpillar,
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Shape> {
        match s {
            "random" => Ok(Shape::Random),
            "balanced" => Ok(Shape::Balanced),
            "caterpillar" => Ok(Shape::Caterpillar),
            _ => Err(Error::invalid(format!("unknown shape {s:?}"))),
        }
    }
}

/// Planted weight profile: `w(u, v) = base^depth(lca(u, v))`, times a
/// multiplicative factor drawn from `[1, 1 + jitter)`. With `jitter < base − 1`
/// the level ordering stays strict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub shape: Shape,
    pub base: f64,
    pub jitter: f64,
}

impl Default for Profile {
    fn default() -> Self {
        Profile {
            shape: Shape::Random,
            base: 2.0,
            jitter: 0.0,
        }
    }
}

impl Profile {
    pub fn with_shape(shape: Shape) -> Profile {
        Profile {
            shape,
            ..Profile::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct PlantedInstance {
    pub graph: Graph,
    pub tree: HCTree,
    pub seed: u64,
}

/// Tree shape only; enough to drive an oracle without materializing the
/// complete graph.
pub fn planted_tree(n: usize, seed: u64, shape: Shape) -> Result<HCTree> {
    if n < 2 {
        return Err(Error::invalid("planted instances need n >= 2"));
    }
    let mut rng = rng_for(seed, &[0x7472_6565]);
    let mut labels: Vec<usize> = (0..n).collect();
    match shape {
        Shape::Balanced => {
            labels.shuffle(&mut rng);
            HCTree::balanced(&labels)
        }
        Shape::Caterpillar => {
            labels.shuffle(&mut rng);
            HCTree::caterpillar(&labels)
        }
        Shape::Random => {
            let mut b = TreeBuilder::new();
            let mut image: Vec<NodeId> = Vec::new();
            // Explicit stack: (set, parent slot). Children are joined once both
            // halves are built, so keep a post-order work list.
            enum Work {
                Split(Vec<usize>),
                Join,
            }
            let mut work = vec![Work::Split(labels)];
            while let Some(item) = work.pop() {
                match item {
                    Work::Split(set) if set.len() == 1 => image.push(b.leaf(set[0])),
                    Work::Split(set) => {
                        let (left, right) = random_bipartition(&set, &mut rng);
                        work.push(Work::Join);
                        work.push(Work::Split(right));
                        work.push(Work::Split(left));
                    }
                    Work::Join => {
                        let r = image.pop().expect("right child");
                        let l = image.pop().expect("left child");
                        image.push(b.join(l, r));
                    }
                }
            }
            b.build(image[0])
        }
    }
}

/// Uniform over the `2^(m−1) − 1` unordered nontrivial bipartitions: a uniform
/// nonempty proper subset, by rejection.
fn random_bipartition(set: &[usize], rng: &mut impl Rng) -> (Vec<usize>, Vec<usize>) {
    loop {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for &v in set {
            if rng.random::<bool>() {
                a.push(v);
            } else {
                b.push(v);
            }
        }
        if !a.is_empty() && !b.is_empty() {
            return (a, b);
        }
    }
}

/// Complete graph whose weights follow the planted tree's LCA depths.
pub fn generate_planted(n: usize, seed: u64, profile: &Profile) -> Result<PlantedInstance> {
    if !(profile.base > 1.0) || !(profile.jitter >= 0.0) || profile.jitter >= profile.base - 1.0 {
        return Err(Error::invalid(
            "profile needs base > 1 and 0 <= jitter < base - 1",
        ));
    }
    let tree = planted_tree(n, seed, profile.shape)?;
    let top = profile.base.powi(tree.height() as i32);
    if !top.is_finite() {
        return Err(Error::invalid(format!(
            "tree height {} overflows the weight profile",
            tree.height()
        )));
    }
    let mut rng = rng_for(seed, &[0x7765_6967_6874]);
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in u + 1..n {
            let depth = tree.depth(tree.lca(u, v)?) as i32;
            let jitter = if profile.jitter > 0.0 {
                1.0 + rng.random::<f64>() * profile.jitter
            } else {
                1.0
            };
            edges.push((u, v, profile.base.powi(depth) * jitter));
        }
    }
    Ok(PlantedInstance {
        graph: Graph::new(n, edges)?,
        tree,
        seed,
    })
}
