//! End-to-end clustering pipelines, the brute-force optimum and the
//! dynamic-stream simulation.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{EdgeUpdate, Graph};
use crate::hctree::{HCTree, NodeId, PartialHCTree, TreeBuilder};
use crate::oracle::SplittingOracle;
use crate::partial::{build_strong_partial, build_weak_partial, BuildTrace, SplitParams};
use crate::sparsest::{exact_sparsest_cut, heuristic_sparsest_cut, recursive_sparsest_tree, CutConfig};
use crate::util::{bits_for, ceil_log2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Das,
    Mw,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Objective> {
        match s {
            "das" | "dasgupta" => Ok(Objective::Das),
            "mw" | "moseley-wang" => Ok(Objective::Mw),
            _ => Err(Error::invalid(format!("unknown objective {s:?}"))),
        }
    }
}

/// A finished tree together with the partial tree and trace behind it.
#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub tree: HCTree,
    pub partial: PartialHCTree,
    pub trace: BuildTrace,
}

fn check_universe(g: &Graph, oracle: &SplittingOracle) -> Result<Vec<usize>> {
    let vs = oracle.truth().vertices();
    let expected: Vec<usize> = (0..g.n()).collect();
    if vs != expected {
        return Err(Error::invalid(format!(
            "oracle covers {} vertices, graph has {}",
            vs.len(),
            g.n()
        )));
    }
    Ok(expected)
}

/// Recursive sparsest-cut tree on the subgraph induced by `set` (sorted),
/// with leaves carrying the original ids.
fn cut_tree(g: &Graph, set: &[usize], cut_fn: &(dyn Fn(&Graph) -> Result<crate::sparsest::Cut> + Sync)) -> Result<HCTree> {
    if set.len() == 1 {
        return Ok(HCTree::singleton(set[0]));
    }
    let (sub, map) = g.induced_subgraph(set)?;
    recursive_sparsest_tree(&sub, cut_fn)?.relabel(&map)
}

/// Strong partial tree, then exact recursive sparsest cuts inside every
/// super-vertex.
pub fn hc_das(
    g: &Graph,
    oracle: &SplittingOracle,
    params: &SplitParams,
    cuts: &CutConfig,
) -> Result<PipelineRun> {
    let vs = check_universe(g, oracle)?;
    let (partial, trace) = build_strong_partial(&vs, oracle, params)?;
    let limit = cuts.exact_limit;
    if let Some(big) = partial.super_vertices().iter().find(|s| s.len() > limit) {
        return Err(Error::TooLarge {
            size: big.len(),
            limit,
        });
    }
    let exact = move |sub: &Graph| exact_sparsest_cut(sub, limit);
    let tree = partial.complete(|set| cut_tree(g, set, &exact))?;
    Ok(PipelineRun {
        tree,
        partial,
        trace,
    })
}

/// Like [`hc_das`] with spectral cuts, which fall back to exact cuts at or
/// below the exact limit.
pub fn hc_das_fast(
    g: &Graph,
    oracle: &SplittingOracle,
    params: &SplitParams,
    cuts: &CutConfig,
) -> Result<PipelineRun> {
    let vs = check_universe(g, oracle)?;
    let (partial, trace) = build_strong_partial(&vs, oracle, params)?;
    let heuristic = |sub: &Graph| heuristic_sparsest_cut(sub, cuts);
    let tree = partial.complete(|set| cut_tree(g, set, &heuristic))?;
    Ok(PipelineRun {
        tree,
        partial,
        trace,
    })
}

/// Weak partial tree, then balanced halving by ascending id inside every
/// super-vertex.
pub fn hc_mw(g: &Graph, oracle: &SplittingOracle, params: &SplitParams) -> Result<PipelineRun> {
    let vs = check_universe(g, oracle)?;
    let (partial, trace) = build_weak_partial(&vs, oracle, params)?;
    let tree = partial.complete(HCTree::balanced)?;
    Ok(PipelineRun {
        tree,
        partial,
        trace,
    })
}

#[derive(Clone, Debug)]
pub struct BruteForceResult {
    pub tree: HCTree,
    pub value: f64,
    pub count: u64,
}

/// Largest input the enumerator accepts.
pub const BRUTE_FORCE_MAX: usize = 10;

/// `(2n − 3)!!`, the number of rooted binary trees on `n` labeled leaves.
pub fn tree_count(n: usize) -> u64 {
    (1..n.max(2) as u64).map(|k| 2 * k - 1).product()
}

struct Enumerator {
    n: usize,
    /// Total weight inside each vertex subset.
    inside: Vec<f64>,
}

impl Enumerator {
    fn new(g: &Graph) -> Result<Enumerator> {
        let n = g.n();
        if !(2..=BRUTE_FORCE_MAX).contains(&n) {
            return Err(Error::invalid(format!(
                "brute force needs 2 <= n <= {BRUTE_FORCE_MAX}, got {n}"
            )));
        }
        let w = g.weight_matrix();
        let mut inside = vec![0.0; 1 << n];
        for mask in 1usize..1 << n {
            let top = usize::BITS as usize - 1 - mask.leading_zeros() as usize;
            let rest = mask & !(1 << top);
            let mut add = 0.0;
            for j in 0..top {
                if rest & (1 << j) != 0 {
                    add += w[top * n + j];
                }
            }
            inside[mask] = inside[rest] + add;
        }
        Ok(Enumerator { n, inside })
    }

    /// `(cost, revenue)` contributions of splitting `set` into `a` and `b`.
    fn split_value(&self, set: usize, a: usize) -> (f64, f64) {
        let b = set & !a;
        let crossing = self.inside[set] - self.inside[a] - self.inside[b];
        let size = set.count_ones() as f64;
        (size * crossing, crossing * (self.n as f64 - size))
    }

    /// Depth-first walk over all trees. `pending` holds sets still to split;
    /// `splits` the choices made so far.
    fn walk(
        &self,
        pending: &mut Vec<usize>,
        splits: &mut Vec<(usize, usize)>,
        acc: (f64, f64),
        visit: &mut dyn FnMut(f64, f64, &[(usize, usize)]),
    ) {
        let Some(set) = pending.pop() else {
            visit(acc.0, acc.1, splits);
            return;
        };
        let low = set & set.wrapping_neg();
        let others = set & !low;
        // Side A always holds the lowest vertex; B is a nonempty subset of
        // the others.
        let mut sub = others;
        loop {
            let b = sub;
            if b != 0 {
                let a = set & !b;
                let (c, r) = self.split_value(set, a);
                let depth = pending.len();
                if a.count_ones() > 1 {
                    pending.push(a);
                }
                if b.count_ones() > 1 {
                    pending.push(b);
                }
                splits.push((a, b));
                self.walk(pending, splits, (acc.0 + c, acc.1 + r), visit);
                splits.pop();
                pending.truncate(depth);
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & others;
        }
        pending.push(set);
    }

    fn tree_from(&self, splits: &[(usize, usize)]) -> Result<HCTree> {
        let by_set: HashMap<usize, (usize, usize)> =
            splits.iter().map(|&(a, b)| (a | b, (a, b))).collect();
        fn go(
            set: usize,
            by_set: &HashMap<usize, (usize, usize)>,
            b: &mut TreeBuilder,
        ) -> NodeId {
            match by_set.get(&set) {
                Some(&(l, r)) => {
                    let l = go(l, by_set, b);
                    let r = go(r, by_set, b);
                    b.join(l, r)
                }
                None => b.leaf(set.trailing_zeros() as usize),
            }
        }
        let mut b = TreeBuilder::new();
        let root = go((1 << self.n) - 1, &by_set, &mut b);
        b.build(root)
    }
}

/// Visits every rooted binary tree on the graph's vertices with its
/// `(cost, revenue)`. Returns the number of trees.
pub fn enumerate_trees(g: &Graph, mut visit: impl FnMut(f64, f64)) -> Result<u64> {
    let e = Enumerator::new(g)?;
    let mut count = 0;
    e.walk(
        &mut vec![(1 << e.n) - 1],
        &mut Vec::new(),
        (0.0, 0.0),
        &mut |c, r, _| {
            count += 1;
            visit(c, r);
        },
    );
    Ok(count)
}

/// Exhaustive optimum: least cost for [`Objective::Das`], most revenue for
/// [`Objective::Mw`]. The first optimal tree in enumeration order wins.
pub fn brute_force_opt(g: &Graph, objective: Objective) -> Result<BruteForceResult> {
    let e = Enumerator::new(g)?;
    let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
    let mut count = 0;
    e.walk(
        &mut vec![(1 << e.n) - 1],
        &mut Vec::new(),
        (0.0, 0.0),
        &mut |c, r, splits| {
            count += 1;
            let better = match (&best, objective) {
                (None, _) => true,
                (Some((v, _)), Objective::Das) => c < *v,
                (Some((v, _)), Objective::Mw) => r > *v,
            };
            if better {
                let value = match objective {
                    Objective::Das => c,
                    Objective::Mw => r,
                };
                best = Some((value, splits.to_vec()));
            }
        },
    );
    let (value, splits) = best.expect("at least one tree");
    Ok(BruteForceResult {
        tree: e.tree_from(&splits)?,
        value,
        count,
    })
}

#[derive(Clone, Debug)]
enum Accumulators {
    Int(Vec<BTreeMap<(usize, usize), i64>>),
    Real(Vec<BTreeMap<(usize, usize), f64>>),
}

/// Space accounting of a streaming state, in bits.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MemoryReport {
    pub super_vertices: usize,
    /// Vertex to super-vertex map.
    pub map_bits: u64,
    /// Shape of the partial tree.
    pub tree_bits: u64,
    pub stored_slots: usize,
    pub peak_slots: usize,
    /// Bits per stored slot: a pair id plus a counter.
    pub slot_bits: u64,
    pub total_bits: u64,
}

/// Single-pass dynamic-stream simulation: the strong partial tree is built
/// before the stream from the oracle alone, and only updates inside one
/// super-vertex are kept.
#[derive(Clone, Debug)]
pub struct StreamingState {
    n: usize,
    partial: PartialHCTree,
    trace: BuildTrace,
    /// Index of the super-vertex holding each vertex.
    group: Vec<usize>,
    groups: Vec<Vec<usize>>,
    acc: Accumulators,
    updates: u64,
    peak_slots: usize,
    cuts: CutConfig,
    finalized: bool,
}

impl StreamingState {
    pub fn init(
        n: usize,
        oracle: &SplittingOracle,
        params: &SplitParams,
        cuts: &CutConfig,
    ) -> Result<StreamingState> {
        let vs: Vec<usize> = (0..n).collect();
        if oracle.truth().vertices() != vs {
            return Err(Error::invalid("oracle universe differs from 0..n"));
        }
        let (partial, trace) = build_strong_partial(&vs, oracle, params)?;
        let mut group = vec![0; n];
        let mut groups = Vec::new();
        for x in partial.leaf_nodes() {
            let set = partial.leaf_set(x).expect("leaf").to_vec();
            for &v in &set {
                group[v] = groups.len();
            }
            groups.push(set);
        }
        let acc = Accumulators::Int(vec![BTreeMap::new(); groups.len()]);
        Ok(StreamingState {
            n,
            partial,
            trace,
            group,
            groups,
            acc,
            updates: 0,
            peak_slots: 0,
            cuts: cuts.clone(),
            finalized: false,
        })
    }

    pub fn partial(&self) -> &PartialHCTree {
        &self.partial
    }

    pub fn trace(&self) -> &BuildTrace {
        &self.trace
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    fn stored_slots(&self) -> usize {
        match &self.acc {
            Accumulators::Int(maps) => maps.iter().map(BTreeMap::len).sum(),
            Accumulators::Real(maps) => maps.iter().map(BTreeMap::len).sum(),
        }
    }

    pub fn feed(&mut self, up: &EdgeUpdate) -> Result<()> {
        if self.finalized {
            return Err(Error::Stream("feed after finalize".into()));
        }
        let (u, v) = (up.u.min(up.v), up.u.max(up.v));
        if u == v || v >= self.n {
            return Err(Error::Stream(format!("bad update pair ({}, {})", up.u, up.v)));
        }
        if !(up.w >= 0.0) || !up.w.is_finite() {
            return Err(Error::Stream(format!("bad update weight {}", up.w)));
        }
        self.updates += 1;
        let g = self.group[u];
        if g != self.group[v] {
            return Ok(());
        }
        let delta = up.delta();
        if let Accumulators::Int(maps) = &self.acc {
            if delta.fract() != 0.0 || delta.abs() >= 9.0e15 {
                let real = maps
                    .iter()
                    .map(|m| m.iter().map(|(&k, &w)| (k, w as f64)).collect())
                    .collect();
                self.acc = Accumulators::Real(real);
            }
        }
        let negative = match &mut self.acc {
            Accumulators::Int(maps) => {
                let slot = maps[g].entry((u, v)).or_insert(0);
                *slot += delta as i64;
                let w = *slot;
                if w == 0 {
                    maps[g].remove(&(u, v));
                }
                w < 0
            }
            Accumulators::Real(maps) => {
                let slot = maps[g].entry((u, v)).or_insert(0.0);
                *slot += delta;
                let w = *slot;
                if w == 0.0 {
                    maps[g].remove(&(u, v));
                }
                w < 0.0
            }
        };
        if negative {
            return Err(Error::Stream(format!(
                "pair ({u}, {v}) has negative accumulated weight"
            )));
        }
        self.peak_slots = self.peak_slots.max(self.stored_slots());
        Ok(())
    }

    /// Recursive exact sparsest cuts on the accumulated weights inside every
    /// super-vertex.
    pub fn finalize(&mut self) -> Result<HCTree> {
        if self.finalized {
            return Err(Error::Stream("stream already finalized".into()));
        }
        self.finalized = true;
        let limit = self.cuts.exact_limit;
        if let Some(big) = self.groups.iter().find(|s| s.len() > limit) {
            return Err(Error::TooLarge {
                size: big.len(),
                limit,
            });
        }
        let mut subgraphs: HashMap<usize, Graph> = HashMap::new();
        for (gi, set) in self.groups.iter().enumerate() {
            let local = |v: usize| set.binary_search(&v).expect("member");
            let edges: Vec<(usize, usize, f64)> = match &self.acc {
                Accumulators::Int(maps) => maps[gi]
                    .iter()
                    .map(|(&(u, v), &w)| (local(u), local(v), w as f64))
                    .collect(),
                Accumulators::Real(maps) => maps[gi]
                    .iter()
                    .map(|(&(u, v), &w)| (local(u), local(v), w))
                    .collect(),
            };
            subgraphs.insert(set[0], Graph::new(set.len(), edges)?);
        }
        let exact = move |sub: &Graph| exact_sparsest_cut(sub, limit);
        self.partial.complete(|set| {
            if set.len() == 1 {
                return Ok(HCTree::singleton(set[0]));
            }
            recursive_sparsest_tree(&subgraphs[&set[0]], &exact)?.relabel(set)
        })
    }

    pub fn memory(&self) -> MemoryReport {
        let leaves = self.groups.len();
        let nodes = self.partial.node_count();
        let map_bits = self.n as u64 * bits_for(leaves as u64);
        let tree_bits = nodes as u64 * 2 * bits_for(nodes as u64);
        let slot_bits = 2 * ceil_log2(self.n) as u64 + bits_for(self.updates + 1);
        let stored = self.stored_slots();
        MemoryReport {
            super_vertices: leaves,
            map_bits,
            tree_bits,
            stored_slots: stored,
            peak_slots: self.peak_slots,
            slot_bits,
            total_bits: map_bits + tree_bits + self.peak_slots as u64 * slot_bits,
        }
    }
}
