//! File formats.
//!
//! Graphs are JSON `{"n": .., "edges": [[u, v, w], ..]}` or a plain edge list
//! (`n <count>` header, then `u v w` lines). Trees are stored as a flat node
//! list in preorder so that deep caterpillars never hit parser recursion
//! limits. Streams are lines `+ u v w` / `- u v w`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeUpdate, Graph, UpdateKind};
use crate::hctree::{HCTree, Node, PartialHCTree, TreeBuilder};
use crate::partial::{BuildTrace, TraceRecord};

#[derive(Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

pub fn graph_to_json(g: &Graph) -> String {
    let file = GraphFile {
        n: g.n(),
        edges: g.edges().iter().map(|e| (e.u, e.v, e.w)).collect(),
    };
    serde_json::to_string(&file).expect("graphs serialize")
}

pub fn graph_from_json(text: &str) -> Result<Graph> {
    let file: GraphFile = serde_json::from_str(text)?;
    Graph::new(file.n, file.edges)
}

pub fn graph_to_text(g: &Graph) -> String {
    let mut out = format!("n {}\n", g.n());
    for e in g.edges() {
        out.push_str(&format!("{} {} {}\n", e.u, e.v, e.w));
    }
    out
}

pub fn graph_from_text(text: &str) -> Result<Graph> {
    let mut n = None;
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Parse(format!("line {}: {line:?}", lineno + 1));
        match parts.as_slice() {
            ["n", count] if n.is_none() => n = Some(count.parse().map_err(|_| bad())?),
            [u, v, w] if n.is_some() => edges.push((
                u.parse().map_err(|_| bad())?,
                v.parse().map_err(|_| bad())?,
                w.parse().map_err(|_| bad())?,
            )),
            _ => return Err(bad()),
        }
    }
    let n = n.ok_or_else(|| Error::Parse("missing `n <count>` header".into()))?;
    Graph::new(n, edges)
}

/// Reads a graph, choosing the format by the first non-blank character.
pub fn read_graph(path: &Path) -> Result<Graph> {
    let text = fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        graph_from_json(&text)
    } else {
        graph_from_text(&text)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum TreeNode {
    Leaf(usize),
    Super(Vec<usize>),
    Children([usize; 2]),
}

#[derive(Serialize, Deserialize)]
struct TreeFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau: Option<usize>,
    nodes: Vec<TreeNode>,
}

pub fn tree_to_json(t: &HCTree) -> String {
    let nodes = t
        .nodes()
        .iter()
        .map(|node| match *node {
            Node::Leaf(v) => TreeNode::Leaf(v),
            Node::Internal(l, r) => TreeNode::Children([l, r]),
        })
        .collect();
    serde_json::to_string(&TreeFile { tau: None, nodes }).expect("trees serialize")
}

pub fn tree_from_json(text: &str) -> Result<HCTree> {
    let file: TreeFile = serde_json::from_str(text)?;
    let mut b = TreeBuilder::new();
    for node in file.nodes.iter() {
        match node {
            TreeNode::Leaf(v) => b.leaf(*v),
            TreeNode::Super(set) if set.len() == 1 => b.leaf(set[0]),
            TreeNode::Super(_) => {
                return Err(Error::Parse("full trees cannot hold super-vertices".into()))
            }
            TreeNode::Children([l, r]) => b.join(*l, *r),
        };
    }
    if file.nodes.is_empty() {
        return Err(Error::Parse("empty tree".into()));
    }
    b.build(0)
}

pub fn partial_to_json(t: &PartialHCTree) -> String {
    let nodes = t
        .nodes()
        .iter()
        .map(|node| match node {
            Node::Leaf(set) => TreeNode::Super(set.clone()),
            Node::Internal(l, r) => TreeNode::Children([*l, *r]),
        })
        .collect();
    let file = TreeFile {
        tau: Some(t.tau()),
        nodes,
    };
    serde_json::to_string(&file).expect("trees serialize")
}

pub fn partial_from_json(text: &str) -> Result<PartialHCTree> {
    let file: TreeFile = serde_json::from_str(text)?;
    if file.nodes.is_empty() {
        return Err(Error::Parse("empty tree".into()));
    }
    let mut b = TreeBuilder::new();
    for node in file.nodes {
        match node {
            TreeNode::Leaf(v) => b.leaf(vec![v]),
            TreeNode::Super(set) => b.leaf(set),
            TreeNode::Children([l, r]) => b.join(l, r),
        };
    }
    b.build_partial(0, file.tau.unwrap_or(usize::MAX))
}

pub fn read_tree(path: &Path) -> Result<HCTree> {
    tree_from_json(&fs::read_to_string(path)?)
}

/// Parses `+ u v w` / `- u v w` lines; blank lines and `#` comments are
/// skipped.
pub fn stream_from_text(text: &str) -> Result<Vec<EdgeUpdate>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || Error::Parse(format!("stream line {}: {line:?}", lineno + 1));
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [sign, u, v, w] = parts.as_slice() else {
            return Err(bad());
        };
        let (u, v, w): (usize, usize, f64) = (
            u.parse().map_err(|_| bad())?,
            v.parse().map_err(|_| bad())?,
            w.parse().map_err(|_| bad())?,
        );
        out.push(match *sign {
            "+" => EdgeUpdate::insert(u, v, w),
            "-" => EdgeUpdate::delete(u, v, w),
            _ => return Err(bad()),
        });
    }
    Ok(out)
}

pub fn stream_to_text(updates: &[EdgeUpdate]) -> String {
    let mut out = String::new();
    for up in updates {
        let sign = match up.kind {
            UpdateKind::Insert => '+',
            UpdateKind::Delete => '-',
        };
        out.push_str(&format!("{sign} {} {} {}\n", up.u, up.v, up.w));
    }
    out
}

pub fn trace_from_jsonl(text: &str) -> Result<BuildTrace> {
    let records = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str::<TraceRecord>)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(BuildTrace { records })
}
