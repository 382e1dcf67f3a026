//! Hierarchical clustering trees and partial trees.
//!
//! Nodes are stored in canonical preorder: a node's children always have
//! larger ids than the node, the subtree of `x` occupies a contiguous id
//! range, and leaves sorted by id appear in left-to-right order. Most
//! bottom-up passes are therefore a reverse scan over ids.
//!
//! LCA queries run in O(1) after O(n log n) preprocessing: every internal
//! node owns the gap between its two children in the leaf order, and the LCA
//! of two leaves is the shallowest gap owner between their positions.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

pub type NodeId = usize;

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Node<L> {
    Leaf(L),
    Internal(NodeId, NodeId),
}

/// Incremental constructor for trees. Node ids handed out here are
/// provisional; the finished tree is renumbered in canonical preorder.
#[derive(Clone, Debug)]
pub struct TreeBuilder<L = usize> {
    nodes: Vec<Node<L>>,
}

impl<L> TreeBuilder<L> {
    pub fn new() -> Self {
        TreeBuilder { nodes: Vec::new() }
    }

    pub fn leaf(&mut self, payload: L) -> NodeId {
        self.nodes.push(Node::Leaf(payload));
        self.nodes.len() - 1
    }

    pub fn join(&mut self, left: NodeId, right: NodeId) -> NodeId {
        self.nodes.push(Node::Internal(left, right));
        self.nodes.len() - 1
    }
}

/// Renumbers the nodes reachable from `root` in preorder. Fails when a node
/// is reachable twice or an id is dangling.
fn canonicalize<L: Clone>(nodes: &[Node<L>], root: NodeId) -> Result<Vec<Node<L>>> {
    if root >= nodes.len() {
        return Err(Error::invalid("root id out of range"));
    }
    let mut seen = vec![false; nodes.len()];
    let mut order = Vec::with_capacity(nodes.len());
    let mut stack = vec![root];
    while let Some(x) = stack.pop() {
        if x >= nodes.len() {
            return Err(Error::invalid("dangling child id"));
        }
        if seen[x] {
            return Err(Error::invalid("node reachable twice"));
        }
        seen[x] = true;
        order.push(x);
        if let Node::Internal(l, r) = nodes[x] {
            stack.push(r);
            stack.push(l);
        }
    }
    let mut new_id = vec![usize::MAX; nodes.len()];
    for (i, &x) in order.iter().enumerate() {
        new_id[x] = i;
    }
    Ok(order
        .iter()
        .map(|&x| match &nodes[x] {
            Node::Leaf(p) => Node::Leaf(p.clone()),
            Node::Internal(l, r) => Node::Internal(new_id[*l], new_id[*r]),
        })
        .collect())
}

/// Rooted binary tree whose leaves are distinct vertex ids.
#[derive(Clone)]
pub struct HCTree {
    nodes: Vec<Node<usize>>,
    parent: Vec<u32>,
    depth: Vec<u32>,
    /// Half-open range of each node's leaves within `leaf_order`.
    range: Vec<(u32, u32)>,
    leaf_order: Vec<usize>,
    /// Vertex id -> leaf position in `leaf_order`.
    pos: Vec<u32>,
    /// Leaf position -> node id.
    leaf_nodes: Vec<u32>,
    sparse: Vec<Vec<u32>>,
}

impl PartialEq for HCTree {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

impl Eq for HCTree {}

impl fmt::Debug for HCTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HCTree({self})")
    }
}

impl fmt::Display for HCTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_nested(&self.nodes, f, |v, f| write!(f, "{v}"))
    }
}

fn fmt_nested<L>(
    nodes: &[Node<L>],
    f: &mut fmt::Formatter<'_>,
    leaf: impl Fn(&L, &mut fmt::Formatter<'_>) -> fmt::Result,
) -> fmt::Result {
    enum Step {
        Visit(NodeId),
        Text(&'static str),
    }
    let mut stack = vec![Step::Visit(0)];
    while let Some(step) = stack.pop() {
        match step {
            Step::Text(s) => f.write_str(s)?,
            Step::Visit(x) => match &nodes[x] {
                Node::Leaf(p) => leaf(p, f)?,
                Node::Internal(l, r) => {
                    f.write_str("(")?;
                    stack.push(Step::Text(")"));
                    stack.push(Step::Visit(*r));
                    stack.push(Step::Text(","));
                    stack.push(Step::Visit(*l));
                }
            },
        }
    }
    Ok(())
}

impl TreeBuilder<usize> {
    pub fn build(self, root: NodeId) -> Result<HCTree> {
        HCTree::from_nodes(canonicalize(&self.nodes, root)?)
    }
}

impl HCTree {
    fn from_nodes(nodes: Vec<Node<usize>>) -> Result<HCTree> {
        let count = nodes.len();
        let mut parent = vec![NONE; count];
        let mut depth = vec![0u32; count];
        let mut leaf_order = Vec::with_capacity(count / 2 + 1);
        let mut leaf_nodes = Vec::with_capacity(count / 2 + 1);
        let mut max_id = 0;
        for (x, node) in nodes.iter().enumerate() {
            match *node {
                Node::Leaf(v) => {
                    leaf_order.push(v);
                    leaf_nodes.push(x as u32);
                    max_id = max_id.max(v);
                }
                Node::Internal(l, r) => {
                    parent[l] = x as u32;
                    parent[r] = x as u32;
                    depth[l] = depth[x] + 1;
                    depth[r] = depth[x] + 1;
                }
            }
        }
        let mut pos = vec![NONE; max_id + 1];
        for (i, &v) in leaf_order.iter().enumerate() {
            if pos[v] != NONE {
                return Err(Error::invalid(format!("vertex {v} appears twice")));
            }
            pos[v] = i as u32;
        }
        let n = leaf_order.len();
        let mut range = vec![(0u32, 0u32); count];
        let mut gap = vec![NONE; n.saturating_sub(1)];
        let mut next_leaf = n as u32;
        for x in (0..count).rev() {
            match nodes[x] {
                Node::Leaf(_) => {
                    next_leaf -= 1;
                    range[x] = (next_leaf, next_leaf + 1);
                }
                Node::Internal(l, r) => {
                    range[x] = (range[l].0, range[r].1);
                    gap[range[l].1 as usize - 1] = x as u32;
                }
            }
        }
        let sparse = build_sparse(&gap, &depth);
        Ok(HCTree {
            nodes,
            parent,
            depth,
            range,
            leaf_order,
            pos,
            leaf_nodes,
            sparse,
        })
    }

    /// Single-leaf tree.
    pub fn singleton(v: usize) -> HCTree {
        HCTree::from_nodes(vec![Node::Leaf(v)]).expect("singleton is valid")
    }

    /// Left-deep caterpillar `(((a,b),c),d)...` over the given order.
    pub fn caterpillar(order: &[usize]) -> Result<HCTree> {
        if order.is_empty() {
            return Err(Error::invalid("empty vertex list"));
        }
        let mut b = TreeBuilder::new();
        let mut cur = b.leaf(order[0]);
        for &v in &order[1..] {
            let leaf = b.leaf(v);
            cur = b.join(cur, leaf);
        }
        b.build(cur)
    }

    /// Balanced tree: the first ⌈m/2⌉ vertices go left, recursively.
    pub fn balanced(order: &[usize]) -> Result<HCTree> {
        if order.is_empty() {
            return Err(Error::invalid("empty vertex list"));
        }
        fn go(b: &mut TreeBuilder, s: &[usize]) -> NodeId {
            if s.len() == 1 {
                return b.leaf(s[0]);
            }
            let mid = s.len().div_ceil(2);
            let l = go(b, &s[..mid]);
            let r = go(b, &s[mid..]);
            b.join(l, r)
        }
        let mut b = TreeBuilder::new();
        let root = go(&mut b, order);
        b.build(root)
    }

    /// Parses the compact notation used by `Display`, e.g. `((0,1),2)`.
    pub fn parse(text: &str) -> Result<HCTree> {
        let (b, root) = parse_nested(text, |tok| {
            tok.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad vertex id {tok:?}")))
        })?;
        b.build(root)
    }

    /// Number of leaves.
    pub fn n(&self) -> usize {
        self.leaf_order.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn internal_count(&self) -> usize {
        self.nodes.len() - self.n()
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn children(&self, x: NodeId) -> Option<(NodeId, NodeId)> {
        match self.nodes[x] {
            Node::Internal(l, r) => Some((l, r)),
            Node::Leaf(_) => None,
        }
    }

    pub fn parent(&self, x: NodeId) -> Option<NodeId> {
        match self.parent[x] {
            NONE => None,
            p => Some(p as usize),
        }
    }

    pub fn leaf_vertex(&self, x: NodeId) -> Option<usize> {
        match self.nodes[x] {
            Node::Leaf(v) => Some(v),
            Node::Internal(..) => None,
        }
    }

    /// Depth of a node; the root has depth 0.
    pub fn depth(&self, x: NodeId) -> usize {
        self.depth[x] as usize
    }

    /// Largest leaf depth.
    pub fn height(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0) as usize
    }

    pub fn contains(&self, v: usize) -> bool {
        self.pos.get(v).is_some_and(|&p| p != NONE)
    }

    /// Sorted vertex set.
    pub fn vertices(&self) -> Vec<usize> {
        let mut vs = self.leaf_order.clone();
        vs.sort_unstable();
        vs
    }

    /// One past the largest vertex id.
    pub fn id_bound(&self) -> usize {
        self.pos.len()
    }

    /// Leaves in left-to-right order.
    pub fn leaf_order(&self) -> &[usize] {
        &self.leaf_order
    }

    fn position(&self, v: usize) -> Result<usize> {
        match self.pos.get(v) {
            Some(&p) if p != NONE => Ok(p as usize),
            _ => Err(Error::UnknownVertex(v)),
        }
    }

    pub fn leaf_node(&self, v: usize) -> Result<NodeId> {
        Ok(self.leaf_at(self.position(v)?))
    }

    fn leaf_at(&self, p: usize) -> NodeId {
        self.leaf_nodes[p] as usize
    }

    /// Leaves under node `x`, in left-to-right order.
    pub fn leaves_under(&self, x: NodeId) -> &[usize] {
        let (a, b) = self.range[x];
        &self.leaf_order[a as usize..b as usize]
    }

    pub fn leaf_count(&self, x: NodeId) -> usize {
        let (a, b) = self.range[x];
        (b - a) as usize
    }

    /// `n − |leaves(x)|`.
    pub fn nonleaves_count(&self, x: NodeId) -> usize {
        self.n() - self.leaf_count(x)
    }

    /// Whether `anc` is `x` or an ancestor of `x`.
    pub fn is_ancestor(&self, anc: NodeId, x: NodeId) -> bool {
        let (a, b) = self.range[anc];
        let (c, d) = self.range[x];
        a <= c && d <= b && (anc <= x)
    }

    fn gap_min(&self, lo: usize, hi: usize) -> u32 {
        // Minimum-depth gap owner over gap[lo..hi), hi > lo.
        let len = hi - lo;
        let k = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let a = self.sparse[k][lo];
        let b = self.sparse[k][hi - (1 << k)];
        if self.depth[b as usize] < self.depth[a as usize] {
            b
        } else {
            a
        }
    }

    fn lca_pos(&self, p: usize, q: usize) -> NodeId {
        if p == q {
            return self.leaf_at(p);
        }
        let (lo, hi) = if p < q { (p, q) } else { (q, p) };
        self.gap_min(lo, hi) as usize
    }

    /// Lowest common ancestor of two vertices. `lca(u, u)` is the leaf of `u`.
    pub fn lca(&self, u: usize, v: usize) -> Result<NodeId> {
        let p = self.position(u)?;
        let q = self.position(v)?;
        Ok(self.lca_pos(p, q))
    }

    /// Depth of `lca(u, v)` for distinct vertices, without validation. Hot path
    /// of the oracle.
    #[inline]
    pub(crate) fn lca_depth_unchecked(&self, u: usize, v: usize) -> u32 {
        let p = self.pos[u] as usize;
        let q = self.pos[v] as usize;
        let (lo, hi) = if p < q { (p, q) } else { (q, p) };
        self.depth[self.gap_min(lo, hi) as usize]
    }

    /// Lowest common ancestor of two nodes.
    pub fn lca_nodes(&self, x: NodeId, y: NodeId) -> NodeId {
        if self.is_ancestor(x, y) {
            return x;
        }
        if self.is_ancestor(y, x) {
            return y;
        }
        self.lca_pos(self.range[x].0 as usize, self.range[y].0 as usize)
    }

    /// Lowest common ancestor of a nonempty vertex set.
    pub fn lca_set(&self, set: &[usize]) -> Result<NodeId> {
        let first = *set
            .first()
            .ok_or_else(|| Error::invalid("lca of an empty set"))?;
        let mut lo = self.position(first)?;
        let mut hi = lo;
        for &v in &set[1..] {
            let p = self.position(v)?;
            lo = lo.min(p);
            hi = hi.max(p);
        }
        Ok(self.lca_pos(lo, hi))
    }

    /// The vertex among three distinct ones that splits away from the other
    /// two: the pair whose LCA is strictly deeper stays together.
    pub fn splits_away(&self, u: usize, v: usize, w: usize) -> Result<usize> {
        if u == v || u == w || v == w {
            return Err(Error::RepeatedVertex(u, v, w));
        }
        self.position(u)?;
        self.position(v)?;
        self.position(w)?;
        Ok(self.splits_away_unchecked(u, v, w))
    }

    #[inline]
    pub(crate) fn splits_away_unchecked(&self, u: usize, v: usize, w: usize) -> usize {
        let d_uv = self.lca_depth_unchecked(u, v);
        let d_uw = self.lca_depth_unchecked(u, w);
        if d_uv > d_uw {
            w
        } else if d_uw > d_uv {
            v
        } else {
            u
        }
    }

    fn membership(&self, set: &[usize]) -> Result<Vec<bool>> {
        let mut inside = vec![false; self.n()];
        for &v in set {
            let p = self.position(v)?;
            if inside[p] {
                return Err(Error::invalid(format!("vertex {v} listed twice")));
            }
            inside[p] = true;
        }
        Ok(inside)
    }

    /// Per-node count of leaves that lie in `set`.
    fn counts_in(&self, inside: &[bool]) -> Vec<u32> {
        let mut count = vec![0u32; self.nodes.len()];
        for x in (0..self.nodes.len()).rev() {
            count[x] = match self.nodes[x] {
                Node::Leaf(v) => inside[self.pos[v] as usize] as u32,
                Node::Internal(l, r) => count[l] + count[r],
            };
        }
        count
    }

    /// Decomposes `set` into the roots of its maximal subtrees: nodes whose
    /// leaves all lie in `set` while their parent's leaves do not.
    pub fn maximal_subtrees(&self, set: &[usize]) -> Result<Vec<NodeId>> {
        let inside = self.membership(set)?;
        let count = self.counts_in(&inside);
        let full = |x: NodeId| count[x] as usize == self.leaf_count(x);
        Ok((0..self.nodes.len())
            .filter(|&x| full(x) && self.parent(x).is_none_or(|p| !full(p)))
            .collect())
    }

    /// Whether `set` is a disjoint union of leaf sets of maximal subtrees.
    pub fn is_composable(&self, set: &[usize]) -> Result<bool> {
        if set.is_empty() {
            return Ok(false);
        }
        let roots = self.maximal_subtrees(set)?;
        let covered: usize = roots.iter().map(|&x| self.leaf_count(x)).sum();
        Ok(covered == set.len())
    }

    /// Whether `set` is exactly the leaf set of one node.
    pub fn is_single_composable(&self, set: &[usize]) -> Result<bool> {
        if set.is_empty() {
            return Ok(false);
        }
        self.membership(set)?;
        Ok(self.leaf_count(self.lca_set(set)?) == set.len())
    }

    /// Prunes the tree to `set` and contracts single-child nodes.
    pub fn restrict(&self, set: &[usize]) -> Result<HCTree> {
        if set.len() < 2 {
            return Err(Error::invalid("restriction needs at least two vertices"));
        }
        if !self.is_composable(set)? {
            return Err(Error::invalid("set is not composable"));
        }
        let inside = self.membership(set)?;
        let count = self.counts_in(&inside);
        let mut b = TreeBuilder::new();
        let mut image = vec![usize::MAX; self.nodes.len()];
        for x in (0..self.nodes.len()).rev() {
            if count[x] == 0 {
                continue;
            }
            image[x] = match self.nodes[x] {
                Node::Leaf(v) => b.leaf(v),
                Node::Internal(l, r) => match (count[l] > 0, count[r] > 0) {
                    (true, true) => b.join(image[l], image[r]),
                    (true, false) => image[l],
                    _ => image[r],
                },
            };
        }
        b.build(image[0])
    }

    /// Smallest vertex id under each node.
    fn min_vertex(&self) -> Vec<usize> {
        let mut m = vec![usize::MAX; self.nodes.len()];
        for x in (0..self.nodes.len()).rev() {
            m[x] = match self.nodes[x] {
                Node::Leaf(v) => v,
                Node::Internal(l, r) => m[l].min(m[r]),
            };
        }
        m
    }

    /// Whole-tree small-tree split order: repeatedly peel the smaller child.
    fn split_order(&self) -> SmallTreeOrder {
        let min_v = self.min_vertex();
        let mut levels = Vec::new();
        let mut cur = self.root();
        while let Node::Internal(l, r) = self.nodes[cur] {
            let (sl, sr) = (self.leaf_count(l), self.leaf_count(r));
            let l_smaller = sl < sr || (sl == sr && min_v[l] < min_v[r]);
            let (small, large) = if l_smaller { (l, r) } else { (r, l) };
            let mut level = self.leaves_under(small).to_vec();
            level.sort_unstable();
            levels.push(level);
            cur = large;
        }
        levels.push(self.leaves_under(cur).to_vec());
        SmallTreeOrder { levels }
    }

    /// Small-tree split order of `restrict(self, set)`.
    pub fn small_tree_order(&self, set: &[usize]) -> Result<SmallTreeOrder> {
        Ok(self.restrict(set)?.split_order())
    }

    pub(crate) fn nodes(&self) -> &[Node<usize>] {
        &self.nodes
    }

    /// Same shape with every leaf `v` renamed to `map[v]`.
    pub fn relabel(&self, map: &[usize]) -> Result<HCTree> {
        if let Some(&v) = self.leaf_order.iter().find(|&&v| v >= map.len()) {
            return Err(Error::UnknownVertex(v));
        }
        let mut b = TreeBuilder::new();
        let root = self.copy_into(&mut b, |b, v| b.leaf(map[v]));
        b.build(root)
    }

    /// Builds the tree by grafting, in place of each leaf `v`, the node that
    /// `graft(v)` adds to the builder.
    pub(crate) fn copy_into<L>(
        &self,
        b: &mut TreeBuilder<L>,
        mut leaf: impl FnMut(&mut TreeBuilder<L>, usize) -> NodeId,
    ) -> NodeId {
        let mut image = vec![0; self.nodes.len()];
        for x in (0..self.nodes.len()).rev() {
            image[x] = match self.nodes[x] {
                Node::Leaf(v) => leaf(b, v),
                Node::Internal(l, r) => b.join(image[l], image[r]),
            };
        }
        image[0]
    }
}

fn build_sparse(gap: &[u32], depth: &[u32]) -> Vec<Vec<u32>> {
    let mut table = vec![gap.to_vec()];
    let mut k = 1;
    while (1usize << k) <= gap.len() {
        let prev = &table[k - 1];
        let half = 1 << (k - 1);
        let row: Vec<u32> = (0..=gap.len() - (1 << k))
            .map(|i| {
                let (a, b) = (prev[i], prev[i + half]);
                if depth[b as usize] < depth[a as usize] {
                    b
                } else {
                    a
                }
            })
            .collect();
        table.push(row);
        k += 1;
    }
    table
}

fn parse_nested<L>(
    text: &str,
    mut leaf: impl FnMut(&str) -> Result<L>,
) -> Result<(TreeBuilder<L>, NodeId)> {
    let mut b = TreeBuilder::new();
    let mut stack: Vec<Vec<NodeId>> = vec![Vec::new()];
    let mut token = String::new();
    let mut flush = |token: &mut String, stack: &mut Vec<Vec<NodeId>>, b: &mut TreeBuilder<L>| {
        let t = token.trim();
        if !t.is_empty() {
            let id = b.leaf(leaf(t)?);
            stack.last_mut().expect("stack").push(id);
        }
        token.clear();
        Ok::<(), Error>(())
    };
    for c in text.chars() {
        match c {
            '(' => {
                flush(&mut token, &mut stack, &mut b)?;
                stack.push(Vec::new());
            }
            ',' => flush(&mut token, &mut stack, &mut b)?,
            ')' => {
                flush(&mut token, &mut stack, &mut b)?;
                let kids = stack.pop().filter(|_| !stack.is_empty());
                match kids.as_deref() {
                    Some([l, r]) => {
                        let id = b.join(*l, *r);
                        stack.last_mut().expect("stack").push(id);
                    }
                    _ => return Err(Error::Parse("each group needs two children".into())),
                }
            }
            _ => token.push(c),
        }
    }
    flush(&mut token, &mut stack, &mut b)?;
    match stack.as_slice() {
        [top] if top.len() == 1 => Ok((b, top[0])),
        _ => Err(Error::Parse("unbalanced tree text".into())),
    }
}

/// Levels of the small-tree split order, each sorted by vertex id. The last
/// level is the single leaf left at the end of the spine.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SmallTreeOrder {
    pub levels: Vec<Vec<usize>>,
}

impl SmallTreeOrder {
    /// All vertices in split order.
    pub fn order(&self) -> Vec<usize> {
        self.levels.concat()
    }

    /// The first `count` vertices in split order.
    pub fn before(&self, count: usize) -> Vec<usize> {
        self.order().into_iter().take(count).collect()
    }

    /// The last `count` vertices in split order.
    pub fn after(&self, count: usize) -> Vec<usize> {
        let order = self.order();
        order[order.len().saturating_sub(count)..].to_vec()
    }

    /// 1-based level containing `v`.
    pub fn level_of(&self, v: usize) -> Option<usize> {
        self.levels
            .iter()
            .position(|lvl| lvl.binary_search(&v).is_ok())
            .map(|i| i + 1)
    }

    /// Union of every level up to the deepest one touched by `before(count)`.
    pub fn induced_before(&self, count: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut taken = 0;
        for lvl in &self.levels {
            if taken >= count {
                break;
            }
            out.extend_from_slice(lvl);
            taken += lvl.len();
        }
        out
    }
}

/// Binary tree whose leaves are singletons or super-vertices.
#[derive(Clone, PartialEq, Eq)]
pub struct PartialHCTree {
    nodes: Vec<Node<Vec<usize>>>,
    tau: usize,
}

impl fmt::Debug for PartialHCTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PartialHCTree({self})")
    }
}

impl fmt::Display for PartialHCTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_nested(&self.nodes, f, |set, f| match set.as_slice() {
            [v] => write!(f, "{v}"),
            _ => {
                let parts: Vec<String> = set.iter().map(|v| v.to_string()).collect();
                write!(f, "{{{}}}", parts.join(" "))
            }
        })
    }
}

impl TreeBuilder<Vec<usize>> {
    pub fn build_partial(self, root: NodeId, tau: usize) -> Result<PartialHCTree> {
        PartialHCTree::from_nodes(canonicalize(&self.nodes, root)?, tau)
    }
}

impl PartialHCTree {
    fn from_nodes(mut nodes: Vec<Node<Vec<usize>>>, tau: usize) -> Result<PartialHCTree> {
        let mut seen = BTreeSet::new();
        for node in &mut nodes {
            if let Node::Leaf(set) = node {
                if set.is_empty() {
                    return Err(Error::invalid("empty super-vertex"));
                }
                set.sort_unstable();
                for &v in set.iter() {
                    if !seen.insert(v) {
                        return Err(Error::invalid(format!("vertex {v} appears twice")));
                    }
                }
            }
        }
        Ok(PartialHCTree { nodes, tau })
    }

    /// A tree made of one super-vertex.
    pub fn super_vertex(set: Vec<usize>, tau: usize) -> Result<PartialHCTree> {
        PartialHCTree::from_nodes(vec![Node::Leaf(set)], tau)
    }

    /// Every leaf of `tree` becomes a singleton leaf.
    pub fn from_tree(tree: &HCTree, tau: usize) -> PartialHCTree {
        let nodes = tree
            .nodes()
            .iter()
            .map(|node| match *node {
                Node::Leaf(v) => Node::Leaf(vec![v]),
                Node::Internal(l, r) => Node::Internal(l, r),
            })
            .collect();
        PartialHCTree { nodes, tau }
    }

    /// Parses the compact notation, with super-vertices written `{a b c}`.
    pub fn parse(text: &str, tau: usize) -> Result<PartialHCTree> {
        let (b, root) = parse_nested(text, |tok| {
            let inner = tok.trim_start_matches('{').trim_end_matches('}');
            inner
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| Error::Parse(format!("bad vertex id {t:?}")))
                })
                .collect()
        })?;
        b.build_partial(root, tau)
    }

    /// Joins two trees under a fresh root.
    pub fn join(left: &PartialHCTree, right: &PartialHCTree, tau: usize) -> Result<PartialHCTree> {
        let mut b = TreeBuilder::new();
        let l = left.copy_into(&mut b);
        let r = right.copy_into(&mut b);
        let root = b.join(l, r);
        b.build_partial(root, tau)
    }

    pub(crate) fn copy_into(&self, b: &mut TreeBuilder<Vec<usize>>) -> NodeId {
        let mut image = vec![0; self.nodes.len()];
        for x in (0..self.nodes.len()).rev() {
            image[x] = match &self.nodes[x] {
                Node::Leaf(set) => b.leaf(set.clone()),
                Node::Internal(l, r) => b.join(image[*l], image[*r]),
            };
        }
        image[0]
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn children(&self, x: NodeId) -> Option<(NodeId, NodeId)> {
        match self.nodes[x] {
            Node::Internal(l, r) => Some((l, r)),
            Node::Leaf(_) => None,
        }
    }

    /// Vertex set of a leaf node.
    pub fn leaf_set(&self, x: NodeId) -> Option<&[usize]> {
        match &self.nodes[x] {
            Node::Leaf(set) => Some(set),
            Node::Internal(..) => None,
        }
    }

    /// Leaf nodes in left-to-right order.
    pub fn leaf_nodes(&self) -> Vec<NodeId> {
        (0..self.nodes.len())
            .filter(|&x| matches!(self.nodes[x], Node::Leaf(_)))
            .collect()
    }

    /// Leaves holding more than one vertex.
    pub fn super_vertices(&self) -> Vec<&[usize]> {
        self.nodes
            .iter()
            .filter_map(|node| match node {
                Node::Leaf(set) if set.len() > 1 => Some(set.as_slice()),
                _ => None,
            })
            .collect()
    }

    /// Number of vertices covered.
    pub fn n(&self) -> usize {
        self.nodes
            .iter()
            .map(|node| match node {
                Node::Leaf(set) => set.len(),
                Node::Internal(..) => 0,
            })
            .sum()
    }

    /// Sorted vertex set.
    pub fn vertices(&self) -> Vec<usize> {
        let mut out = self.leaves_under(0);
        out.sort_unstable();
        out
    }

    /// Vertices under node `x`, left to right.
    pub fn leaves_under(&self, x: NodeId) -> Vec<usize> {
        let end = self.subtree_end(x);
        self.nodes[x..end]
            .iter()
            .filter_map(|node| match node {
                Node::Leaf(set) => Some(set.iter().copied()),
                Node::Internal(..) => None,
            })
            .flatten()
            .collect()
    }

    /// One past the last id of the subtree rooted at `x`.
    fn subtree_end(&self, x: NodeId) -> NodeId {
        let mut y = x;
        while let Node::Internal(_, r) = self.nodes[y] {
            y = r;
        }
        y + 1
    }

    /// Per-node vertex counts.
    pub(crate) fn sizes(&self) -> Vec<usize> {
        let mut size = vec![0; self.nodes.len()];
        for x in (0..self.nodes.len()).rev() {
            size[x] = match &self.nodes[x] {
                Node::Leaf(set) => set.len(),
                Node::Internal(l, r) => size[*l] + size[*r],
            };
        }
        size
    }

    /// Map from vertex id to the leaf node holding it.
    pub fn leaf_of(&self) -> Vec<Option<NodeId>> {
        let bound = self.vertices().last().map_or(0, |&v| v + 1);
        let mut map = vec![None; bound];
        for (x, node) in self.nodes.iter().enumerate() {
            if let Node::Leaf(set) = node {
                for &v in set {
                    map[v] = Some(x);
                }
            }
        }
        map
    }

    /// Deepest node whose subtree contains every vertex of `set`.
    pub fn lca_set(&self, set: &[usize]) -> Result<NodeId> {
        if set.is_empty() {
            return Err(Error::invalid("lca of an empty set"));
        }
        let leaf_of = self.leaf_of();
        let mut hits = vec![0usize; self.nodes.len()];
        for &v in set {
            let x = leaf_of
                .get(v)
                .copied()
                .flatten()
                .ok_or(Error::UnknownVertex(v))?;
            hits[x] += 1;
        }
        for x in (0..self.nodes.len()).rev() {
            if let Node::Internal(l, r) = self.nodes[x] {
                hits[x] += hits[l] + hits[r];
            }
        }
        // Deepest node with all hits: walk down from the root.
        let mut x = 0;
        while let Node::Internal(l, r) = self.nodes[x] {
            if hits[l] == set.len() {
                x = l;
            } else if hits[r] == set.len() {
                x = r;
            } else {
                break;
            }
        }
        Ok(x)
    }

    /// Inserts a fresh parent above `x` whose children are `x` and the root
    /// of `other`.
    pub fn graft_beside(&self, x: NodeId, other: &PartialHCTree) -> Result<PartialHCTree> {
        if x >= self.nodes.len() {
            return Err(Error::invalid("node id out of range"));
        }
        let mut b = TreeBuilder::new();
        let mut image = vec![0; self.nodes.len()];
        for y in (0..self.nodes.len()).rev() {
            image[y] = match &self.nodes[y] {
                Node::Leaf(set) => b.leaf(set.clone()),
                Node::Internal(l, r) => b.join(image[*l], image[*r]),
            };
            if y == x {
                let o = other.copy_into(&mut b);
                image[y] = b.join(image[y], o);
            }
        }
        b.build_partial(image[0], self.tau)
    }

    /// Full tree obtained by replacing every leaf set by the tree `fill`
    /// returns for it.
    pub fn complete(&self, mut fill: impl FnMut(&[usize]) -> Result<HCTree>) -> Result<HCTree> {
        let mut b = TreeBuilder::new();
        let mut image = vec![0; self.nodes.len()];
        for x in (0..self.nodes.len()).rev() {
            image[x] = match &self.nodes[x] {
                Node::Leaf(set) => {
                    let sub = fill(set)?;
                    let mut got = sub.vertices();
                    got.sort_unstable();
                    if got != *set {
                        return Err(Error::invalid("filled subtree has the wrong leaf set"));
                    }
                    sub.copy_into(&mut b, |b, v| b.leaf(v))
                }
                Node::Internal(l, r) => b.join(image[*l], image[*r]),
            };
        }
        b.build(image[0])
    }

    /// The same tree as an [`HCTree`] when every leaf is a singleton.
    pub fn to_hctree(&self) -> Result<HCTree> {
        self.complete(|set| match set {
            [v] => Ok(HCTree::singleton(*v)),
            _ => Err(Error::invalid("tree still has super-vertices")),
        })
    }

    pub(crate) fn nodes(&self) -> &[Node<Vec<usize>>] {
        &self.nodes
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Consistency {
    Strong,
    Weak,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// The partial tree and the reference tree cover different vertices.
    UniverseMismatch {
        missing: Vec<usize>,
        extra: Vec<usize>,
    },
    /// A super-vertex is larger than the tree's threshold.
    Oversized { leaf: NodeId, size: usize, tau: usize },
    /// A super-vertex is not the full leaf set of its LCA in the reference.
    NotMaximal {
        leaf: NodeId,
        size: usize,
        lca_size: usize,
    },
    /// A super-vertex leaves more than one hanging subtree below its LCA.
    NotContractible {
        leaf: NodeId,
        size: usize,
        lca_size: usize,
    },
    /// An internal node's vertex set is not a subtree of the reference.
    SubtreeMismatch {
        node: NodeId,
        size: usize,
        reference_size: usize,
    },
    /// Two leaves on opposite sides of `node` meet below the reference LCA.
    CrossPair {
        node: NodeId,
        left_leaf: NodeId,
        right_leaf: NodeId,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    pub kind: Consistency,
    pub violations: Vec<Violation>,
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that every super-vertex is a maximal subtree of `reference` and
/// that every internal node of `partial` spans a reference subtree.
pub fn check_strong_consistency(partial: &PartialHCTree, reference: &HCTree) -> ConsistencyReport {
    check(partial, reference, Consistency::Strong)
}

/// Like [`check_strong_consistency`], but a super-vertex may be the leaf set
/// of its reference LCA minus one hanging subtree.
pub fn check_weak_consistency(partial: &PartialHCTree, reference: &HCTree) -> ConsistencyReport {
    check(partial, reference, Consistency::Weak)
}

fn check(partial: &PartialHCTree, reference: &HCTree, kind: Consistency) -> ConsistencyReport {
    let mut violations = Vec::new();
    let have = partial.vertices();
    let want = reference.vertices();
    if have != want {
        let h: BTreeSet<_> = have.iter().copied().collect();
        let w: BTreeSet<_> = want.iter().copied().collect();
        violations.push(Violation::UniverseMismatch {
            missing: w.difference(&h).copied().collect(),
            extra: h.difference(&w).copied().collect(),
        });
        return ConsistencyReport { kind, violations };
    }

    let nodes = partial.nodes();
    let sizes = partial.sizes();
    // Reference LCA of every partial-tree node's vertex set.
    let mut image = vec![0; nodes.len()];
    for x in (0..nodes.len()).rev() {
        image[x] = match &nodes[x] {
            Node::Leaf(set) => reference.lca_set(set).expect("universe checked"),
            Node::Internal(l, r) => reference.lca_nodes(image[*l], image[*r]),
        };
    }

    for x in 0..nodes.len() {
        let Node::Leaf(set) = &nodes[x] else { continue };
        if set.len() > partial.tau().max(1) {
            violations.push(Violation::Oversized {
                leaf: x,
                size: set.len(),
                tau: partial.tau(),
            });
        }
        let lca_size = reference.leaf_count(image[x]);
        if lca_size == set.len() {
            continue;
        }
        match kind {
            Consistency::Strong => violations.push(Violation::NotMaximal {
                leaf: x,
                size: set.len(),
                lca_size,
            }),
            Consistency::Weak => {
                let rest: Vec<usize> = reference
                    .leaves_under(image[x])
                    .iter()
                    .copied()
                    .filter(|v| set.binary_search(v).is_err())
                    .collect();
                let hole = reference.lca_set(&rest).expect("nonempty");
                if reference.leaf_count(hole) != rest.len() {
                    violations.push(Violation::NotContractible {
                        leaf: x,
                        size: set.len(),
                        lca_size,
                    });
                }
            }
        }
    }

    for y in 0..nodes.len() {
        let Node::Internal(a, b) = nodes[y] else { continue };
        let z = image[y];
        let reference_size = reference.leaf_count(z);
        if reference_size != sizes[y] {
            violations.push(Violation::SubtreeMismatch {
                node: y,
                size: sizes[y],
                reference_size,
            });
            continue;
        }
        // Two leaves across y meet exactly at z unless both of their images
        // sit strictly inside the same child of z.
        let Some((zl, zr)) = reference.children(z) else { continue };
        let side = |x: NodeId| -> [Option<NodeId>; 2] {
            let mut hit = [None, None];
            let end = partial.subtree_end(x);
            for leaf in x..end {
                if matches!(nodes[leaf], Node::Leaf(_)) {
                    let r = image[leaf];
                    if reference.is_ancestor(zl, r) {
                        hit[0].get_or_insert(leaf);
                    } else if reference.is_ancestor(zr, r) {
                        hit[1].get_or_insert(leaf);
                    }
                }
            }
            hit
        };
        let (left, right) = (side(a), side(b));
        for k in 0..2 {
            if let (Some(l), Some(r)) = (left[k], right[k]) {
                violations.push(Violation::CrossPair {
                    node: y,
                    left_leaf: l,
                    right_leaf: r,
                });
                break;
            }
        }
    }
    ConsistencyReport { kind, violations }
}
