//! Dasgupta cost, Moseley-Wang revenue and the edge classes used to audit
//! weakly consistent partial trees.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::hctree::{check_weak_consistency, HCTree, PartialHCTree};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObjectiveValue {
    pub value: f64,
    /// `(edge index, contribution)` pairs when requested.
    pub breakdown: Option<Vec<(usize, f64)>>,
}

fn check_universe(g: &Graph, t: &HCTree) -> Result<()> {
    let vs = t.vertices();
    if vs.len() != g.n() || vs.last().is_some_and(|&v| v + 1 != g.n()) {
        return Err(Error::invalid(format!(
            "tree covers {} vertices, graph has {}",
            vs.len(),
            g.n()
        )));
    }
    Ok(())
}

fn evaluate(
    g: &Graph,
    t: &HCTree,
    subset: Option<&[usize]>,
    breakdown: bool,
    per_edge: impl Fn(f64, usize) -> f64,
) -> Result<ObjectiveValue> {
    check_universe(g, t)?;
    let all: Vec<usize>;
    let idx = match subset {
        Some(s) => s,
        None => {
            all = (0..g.m()).collect();
            &all
        }
    };
    let mut value = 0.0;
    let mut parts = breakdown.then(Vec::new);
    for &i in idx {
        let e = g
            .edges()
            .get(i)
            .ok_or_else(|| Error::invalid(format!("edge index {i} out of range")))?;
        let c = per_edge(e.w, t.leaf_count(t.lca(e.u, e.v)?));
        value += c;
        if let Some(p) = parts.as_mut() {
            p.push((i, c));
        }
    }
    Ok(ObjectiveValue {
        value,
        breakdown: parts,
    })
}

/// `Σ w(e)·|leaves(lca(e))|` over all edges or the given edge indices.
pub fn dasgupta_cost(g: &Graph, t: &HCTree, subset: Option<&[usize]>) -> Result<ObjectiveValue> {
    evaluate(g, t, subset, false, |w, k| w * k as f64)
}

/// `Σ w(e)·(n − |leaves(lca(e))|)` over all edges or the given edge indices.
pub fn mw_revenue(g: &Graph, t: &HCTree, subset: Option<&[usize]>) -> Result<ObjectiveValue> {
    let n = g.n();
    evaluate(g, t, subset, false, |w, k| w * (n - k) as f64)
}

pub fn dasgupta_cost_breakdown(g: &Graph, t: &HCTree) -> Result<ObjectiveValue> {
    evaluate(g, t, None, true, |w, k| w * k as f64)
}

pub fn mw_revenue_breakdown(g: &Graph, t: &HCTree) -> Result<ObjectiveValue> {
    let n = g.n();
    evaluate(g, t, None, true, |w, k| w * (n - k) as f64)
}

/// Splits edge indices into those inside one leaf set of `partial` and the
/// rest.
pub fn edge_partition_by_supervertex(g: &Graph, partial: &PartialHCTree) -> (Vec<usize>, Vec<usize>) {
    let leaf_of = partial.leaf_of();
    let (mut same, mut cross) = (Vec::new(), Vec::new());
    for (i, e) in g.edges().iter().enumerate() {
        let a = leaf_of.get(e.u).copied().flatten();
        let b = leaf_of.get(e.v).copied().flatten();
        if a.is_some() && a == b {
            same.push(i);
        } else {
            cross.push(i);
        }
    }
    (same, cross)
}

/// Edge-class audit of a weakly consistent partial tree against the planted
/// tree. Nonleaf counts for the partial tree are exact for cross edges in any
/// completion, and lower bounds for same-super-vertex edges.
#[derive(Clone, Debug, Serialize)]
pub struct MwStructureReport {
    pub n: usize,
    pub tau: usize,
    pub same_edges: usize,
    /// Smallest `n − |X|` over super-vertices that carry an edge.
    pub same_floor: Option<usize>,
    /// `n − τ`.
    pub same_floor_bound: usize,
    pub cross_disjoint_edges: usize,
    /// Cross edges with disjoint super-vertex LCAs whose nonleaf count differs
    /// from the planted tree.
    pub cross_disjoint_mismatches: usize,
    pub cross_nested_edges: usize,
    /// Largest `nonleaves(planted) − nonleaves(partial)` over nested cross
    /// edges.
    pub max_nested_deficit: i64,
    pub elow_threshold: f64,
    pub elow_edges: usize,
    /// Planted revenue carried by low edges, as a fraction of planted revenue.
    pub elow_revenue_share: f64,
    pub planted_revenue: f64,
}

impl MwStructureReport {
    /// The equality and floor checks that hold for any weakly consistent tree.
    pub fn holds(&self) -> bool {
        self.cross_disjoint_mismatches == 0
            && self.same_floor.is_none_or(|f| f >= self.same_floor_bound)
            && self.max_nested_deficit <= self.tau as i64
    }
}

pub fn mw_structure_report(
    g: &Graph,
    partial: &PartialHCTree,
    planted: &HCTree,
    elow_threshold: f64,
) -> Result<MwStructureReport> {
    check_universe(g, planted)?;
    let report = check_weak_consistency(partial, planted);
    if !report.is_consistent() {
        return Err(Error::invalid(format!(
            "partial tree is not weakly consistent ({} violations)",
            report.violations.len()
        )));
    }
    let n = g.n();
    let tau = partial.tau();
    let leaf_of = partial.leaf_of();
    let sizes = partial.sizes();
    let leaf_nodes = partial.leaf_nodes();
    let (parent, depth) = parents_and_depths(partial);
    // Planted LCA of every partial-tree leaf set.
    let mut image = vec![usize::MAX; partial.node_count()];
    for &x in &leaf_nodes {
        image[x] = planted.lca_set(partial.leaf_set(x).expect("leaf"))?;
    }

    let mut out = MwStructureReport {
        n,
        tau,
        same_edges: 0,
        same_floor: None,
        same_floor_bound: n.saturating_sub(tau),
        cross_disjoint_edges: 0,
        cross_disjoint_mismatches: 0,
        cross_nested_edges: 0,
        max_nested_deficit: 0,
        elow_threshold,
        elow_edges: 0,
        elow_revenue_share: 0.0,
        planted_revenue: 0.0,
    };
    let mut elow_revenue = 0.0;
    for e in g.edges() {
        let (xu, xv) = (leaf_of[e.u].expect("covered"), leaf_of[e.v].expect("covered"));
        let planted_nonleaves = planted.nonleaves_count(planted.lca(e.u, e.v)?);
        let rev = e.w * planted_nonleaves as f64;
        out.planted_revenue += rev;
        let (ru, rv) = (image[xu], image[xv]);
        let intersect = planted.is_ancestor(ru, rv) || planted.is_ancestor(rv, ru);
        if intersect && planted_nonleaves as f64 <= elow_threshold {
            out.elow_edges += 1;
            elow_revenue += rev;
        }
        if xu == xv {
            out.same_edges += 1;
            let floor = n - sizes[xu];
            out.same_floor = Some(out.same_floor.map_or(floor, |f| f.min(floor)));
            continue;
        }
        let y = partial_lca(&parent, &depth, xu, xv);
        let partial_nonleaves = n - sizes[y];
        if intersect {
            out.cross_nested_edges += 1;
            let deficit = planted_nonleaves as i64 - partial_nonleaves as i64;
            out.max_nested_deficit = out.max_nested_deficit.max(deficit);
        } else {
            out.cross_disjoint_edges += 1;
            if partial_nonleaves != planted_nonleaves {
                out.cross_disjoint_mismatches += 1;
            }
        }
    }
    out.elow_revenue_share = if out.planted_revenue > 0.0 {
        elow_revenue / out.planted_revenue
    } else {
        0.0
    };
    Ok(out)
}

fn parents_and_depths(partial: &PartialHCTree) -> (Vec<usize>, Vec<usize>) {
    let count = partial.node_count();
    let mut parent = vec![usize::MAX; count];
    let mut depth = vec![0; count];
    for x in 0..count {
        if let Some((l, r)) = partial.children(x) {
            parent[l] = x;
            parent[r] = x;
            depth[l] = depth[x] + 1;
            depth[r] = depth[x] + 1;
        }
    }
    (parent, depth)
}

fn partial_lca(parent: &[usize], depth: &[usize], mut a: usize, mut b: usize) -> usize {
    while a != b {
        if depth[a] >= depth[b] {
            a = parent[a];
        } else {
            b = parent[b];
        }
    }
    a
}
