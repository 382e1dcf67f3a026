//! Sparsest cuts: exact enumeration for small graphs, a spectral sweep for
//! larger ones, and the recursive sparsest-cut tree.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::hctree::{HCTree, NodeId, TreeBuilder};
use crate::util::{rng_for, with_big_stack};

/// Relative tolerance under which two sparsities count as tied.
const TIE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cut {
    /// Side containing vertex 0, sorted.
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    /// `w(A, B) / min(|A|, |B|)`.
    pub sparsity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutConfig {
    /// Largest graph solved by exhaustive enumeration.
    pub exact_limit: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for CutConfig {
    fn default() -> Self {
        CutConfig {
            exact_limit: 20,
            max_iters: 200,
            tol: 1e-8,
            seed: 0,
        }
    }
}

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE * a.abs().max(b.abs()).max(1.0)
}

/// Lexicographic order of the sorted member lists of two bitmasks.
fn lex_less(x: u32, y: u32) -> bool {
    let diff = x ^ y;
    if diff == 0 {
        return false;
    }
    let first = diff.trailing_zeros();
    let above = !((1u32 << first) | ((1u32 << first) - 1));
    if x & (1 << first) != 0 {
        // x continues with `first`; y continues with something larger or ends.
        y & above != 0
    } else {
        x & above == 0
    }
}

fn mask_members(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask & (1 << i) != 0).collect()
}

/// Minimum-sparsity bipartition by enumerating all `2^(n−1) − 1` cuts with
/// vertex 0 fixed on side A. Ties go to the lexicographically smallest A.
pub fn exact_sparsest_cut(g: &Graph, exact_limit: usize) -> Result<Cut> {
    let n = g.n();
    if n < 2 {
        return Err(Error::invalid("a cut needs at least two vertices"));
    }
    if n > exact_limit || n > 31 {
        return Err(Error::TooLarge {
            size: n,
            limit: exact_limit.min(31),
        });
    }
    let w = g.weight_matrix();
    // Gray-code walk over the subsets of {1..n-1} that join vertex 0 in A.
    // Each step moves one vertex and updates the cut weight from its matrix
    // row; drift stays far below the tie tolerance.
    let mut in_a = vec![false; n];
    in_a[0] = true;
    let mut mask: u32 = 1;
    let mut cut: f64 = (1..n).map(|j| w[j]).sum();
    let full: u32 = (1u32 << n) - 1;
    let mut best: Option<(f64, u32)> = None;
    let steps: u64 = 1u64 << (n - 1);
    for step in 0..steps {
        if step > 0 {
            let bit = step.trailing_zeros() as usize + 1;
            let row = &w[bit * n..bit * n + n];
            let mut to_a = 0.0;
            let mut to_b = 0.0;
            for j in 0..n {
                if j != bit {
                    if in_a[j] {
                        to_a += row[j];
                    } else {
                        to_b += row[j];
                    }
                }
            }
            if in_a[bit] {
                cut += to_a - to_b;
            } else {
                cut += to_b - to_a;
            }
            in_a[bit] = !in_a[bit];
            mask ^= 1 << bit;
        }
        if mask == full {
            continue;
        }
        let size_a = mask.count_ones() as usize;
        let sparsity = cut.max(0.0) / size_a.min(n - size_a) as f64;
        best = match best {
            None => Some((sparsity, mask)),
            Some((s, m)) => {
                if ties(sparsity, s) {
                    Some(if lex_less(mask, m) { (sparsity, mask) } else { (s, m) })
                } else if sparsity < s {
                    Some((sparsity, mask))
                } else {
                    Some((s, m))
                }
            }
        };
    }
    let (_, mask) = best.expect("n >= 2 gives at least one cut");
    // Report the exact sparsity of the winner.
    let a = mask_members(mask, n);
    let b = mask_members(!mask & full, n);
    let sparsity = cut_sparsity(g, &a, &b);
    Ok(Cut { a, b, sparsity })
}

/// `w(A, B) / min(|A|, |B|)` computed from the edge list.
pub fn cut_sparsity(g: &Graph, a: &[usize], b: &[usize]) -> f64 {
    let mut side = vec![0u8; g.n()];
    for &v in a {
        side[v] = 1;
    }
    for &v in b {
        side[v] = 2;
    }
    let crossing: f64 = g
        .edges()
        .iter()
        .filter(|e| side[e.u] + side[e.v] == 3)
        .map(|e| e.w)
        .sum();
    crossing / a.len().min(b.len()) as f64
}

/// Spectral sweep: approximate Fiedler vector by power iteration on
/// `c·I − L` with the constant vector projected out, then the best prefix cut
/// in coordinate order. Falls back to [`exact_sparsest_cut`] at or below the
/// exact limit.
pub fn heuristic_sparsest_cut(g: &Graph, cfg: &CutConfig) -> Result<Cut> {
    let n = g.n();
    if n < 2 {
        return Err(Error::invalid("a cut needs at least two vertices"));
    }
    if n <= cfg.exact_limit {
        return exact_sparsest_cut(g, cfg.exact_limit);
    }
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut degree = vec![0.0; n];
    for e in g.edges() {
        adj[e.u].push((e.v, e.w));
        adj[e.v].push((e.u, e.w));
        degree[e.u] += e.w;
        degree[e.v] += e.w;
    }
    let shift = 2.0 * degree.iter().cloned().fold(0.0, f64::max) + 1.0;
    let apply = |x: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let mut lx = degree[i] * x[i];
            for &(j, w) in &adj[i] {
                lx -= w * x[j];
            }
            out[i] = shift * x[i] - lx;
        }
    };
    let deflate = |x: &mut [f64]| {
        let mean = x.iter().sum::<f64>() / n as f64;
        x.iter_mut().for_each(|v| *v -= mean);
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            x.iter_mut().for_each(|v| *v /= norm);
        }
    };
    let mut rng = rng_for(cfg.seed, &[n as u64, g.m() as u64]);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    deflate(&mut x);
    let mut y = vec![0.0; n];
    for _ in 0..cfg.max_iters {
        apply(&x, &mut y);
        // Rayleigh quotient of the unit vector x, then the eigen-residual
        // relative to the shift scale.
        let lambda: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let residual = y
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt()
            / shift;
        deflate(&mut y);
        std::mem::swap(&mut x, &mut y);
        if residual < cfg.tol {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]).then(i.cmp(&j)));
    // Sweep prefix cuts, tracking the crossing weight incrementally.
    let mut in_prefix = vec![false; n];
    let mut crossing = 0.0;
    let mut best: (f64, usize) = (f64::NAN, 0);
    for (k, &v) in order.iter().enumerate().take(n - 1) {
        for &(j, w) in &adj[v] {
            if in_prefix[j] {
                crossing -= w;
            } else {
                crossing += w;
            }
        }
        in_prefix[v] = true;
        let size = k + 1;
        let sparsity = crossing.max(0.0) / size.min(n - size) as f64;
        if best.1 == 0 || (sparsity < best.0 && !ties(sparsity, best.0)) {
            best = (sparsity, size);
        }
    }
    let mut a: Vec<usize> = order[..best.1].to_vec();
    let mut b: Vec<usize> = order[best.1..].to_vec();
    a.sort_unstable();
    b.sort_unstable();
    if b.first() == Some(&0) {
        std::mem::swap(&mut a, &mut b);
    }
    let sparsity = cut_sparsity(g, &a, &b);
    Ok(Cut { a, b, sparsity })
}

/// Recursively cuts induced subgraphs until singletons. Leaves carry the
/// vertex ids of `g`.
pub fn recursive_sparsest_tree(
    g: &Graph,
    cut_fn: &(dyn Fn(&Graph) -> Result<Cut> + Sync),
) -> Result<HCTree> {
    if g.n() == 0 {
        return Err(Error::invalid("empty graph"));
    }
    with_big_stack(|| {
        let mut b = TreeBuilder::new();
        let all: Vec<usize> = (0..g.n()).collect();
        let root = grow(g, &all, cut_fn, &mut b)?;
        b.build(root)
    })
}

fn grow(
    g: &Graph,
    set: &[usize],
    cut_fn: &(dyn Fn(&Graph) -> Result<Cut> + Sync),
    b: &mut TreeBuilder,
) -> Result<NodeId> {
    if set.len() == 1 {
        return Ok(b.leaf(set[0]));
    }
    let (sub, map) = g.induced_subgraph(set)?;
    let cut = cut_fn(&sub)?;
    if cut.a.is_empty() || cut.b.is_empty() || cut.a.len() + cut.b.len() != set.len() {
        return Err(Error::invalid("cut provider returned an invalid bipartition"));
    }
    let a: Vec<usize> = cut.a.iter().map(|&i| map[i]).collect();
    let bb: Vec<usize> = cut.b.iter().map(|&i| map[i]).collect();
    let l = grow(g, &a, cut_fn, b)?;
    let r = grow(g, &bb, cut_fn, b)?;
    Ok(b.join(l, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::new(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn triangle_cut() {
        let g = Graph::new(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let c = exact_sparsest_cut(&g, 20).unwrap();
        assert_eq!(c.sparsity, 2.0);
        assert_eq!(c.a, vec![0]);
    }

    #[test]
    fn disjoint_edges_cut_is_free() {
        let g = Graph::new(4, [(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        let c = exact_sparsest_cut(&g, 20).unwrap();
        assert_eq!(c.sparsity, 0.0);
        assert_eq!(c.a, vec![0, 1]);
    }

    #[test]
    fn path_cut() {
        let c = exact_sparsest_cut(&path3(), 20).unwrap();
        assert_eq!(c.sparsity, 1.0);
        assert_eq!(c.a, vec![0]);
    }

    #[test]
    fn exact_refuses_large_graphs() {
        let g = Graph::empty(25);
        assert!(matches!(
            exact_sparsest_cut(&g, 20),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn lex_order_of_masks() {
        // {0} < {0,1} < {0,1,2} < {0,2}
        assert!(lex_less(0b001, 0b011));
        assert!(lex_less(0b011, 0b111));
        assert!(lex_less(0b111, 0b101));
        assert!(!lex_less(0b101, 0b011));
    }

    #[test]
    fn zero_weight_graph_peels_vertex_zero() {
        let c = exact_sparsest_cut(&Graph::empty(5), 20).unwrap();
        assert_eq!(c.a, vec![0]);
        assert_eq!(c.sparsity, 0.0);
    }

    #[test]
    fn heuristic_falls_back_to_exact() {
        let g = path3();
        let cfg = CutConfig::default();
        assert_eq!(heuristic_sparsest_cut(&g, &cfg).unwrap(), exact_sparsest_cut(&g, 20).unwrap());
    }

    #[test]
    fn heuristic_finds_components() {
        // Two disjoint 30-cliques.
        let mut edges = Vec::new();
        for block in [0, 30] {
            for u in 0..30 {
                for v in u + 1..30 {
                    edges.push((block + u, block + v, 1.0));
                }
            }
        }
        let g = Graph::new(60, edges).unwrap();
        let c = heuristic_sparsest_cut(&g, &CutConfig::default()).unwrap();
        assert_eq!(c.sparsity, 0.0);
        assert_eq!(c.a, (0..30).collect::<Vec<_>>());
    }

    #[test]
    fn recursive_tree_basics() {
        let g = Graph::empty(1);
        let exact = |g: &Graph| exact_sparsest_cut(g, 20);
        let t = recursive_sparsest_tree(&g, &exact).unwrap();
        assert_eq!(t.n(), 1);
        let g = Graph::new(
            6,
            [
                (0, 1, 1.0),
                (1, 2, 1.0),
                (0, 2, 1.0),
                (3, 4, 1.0),
                (4, 5, 1.0),
                (3, 5, 1.0),
            ],
        )
        .unwrap();
        let t = recursive_sparsest_tree(&g, &exact).unwrap();
        let (l, r) = t.children(t.root()).unwrap();
        assert_eq!(t.leaves_under(l).len(), 3);
        assert_eq!(t.leaves_under(r).len(), 3);
    }
}
