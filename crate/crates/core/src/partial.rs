//! Partial tree construction from oracle answers.
//!
//! Two builders live here. [`build_strong_partial`] repeatedly peels the
//! counterpart set of the best probe vertex, so every super-vertex ends up a
//! maximal subtree of the reference. [`build_weak_partial`] splits against a
//! horizon set, falls back to an orphan-predecessor test when the split only
//! finds vertices outside the current set, and glues the halves back with
//! [`tree_merge`].
//!
//! In exact-counter mode every sampled set is replaced by the full universe.
//! Counts over a horizon are then shared through a [`PairCounts`] matrix that
//! is derived, not recomputed, for child sets whenever that is cheaper.

use std::rc::Rc;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hctree::PartialHCTree;
use crate::oracle::SplittingOracle;
use crate::util::{ceil_log2, rng_for, with_big_stack};

const TAG_STRONG: u64 = 0x7374_726f_6e67;
const TAG_SPLIT: u64 = 0x7370_6c69_74;
const TAG_ORPHAN: u64 = 0x6f72_7068_616e;
const NONE: u32 = u32::MAX;

/// Constants of both constructions. Sample sizes and the super-vertex
/// threshold scale with `log₂ n`; the threshold fractions are fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitParams {
    /// Largest set returned as a super-vertex.
    pub tau: usize,
    pub eps: f64,
    /// Per-probe sample size of the strong builder.
    pub sample_strong: usize,
    /// Probe vertices drawn per weak split.
    pub sample_split: usize,
    /// Probe vertices drawn per orphan-predecessor test.
    pub sample_orphan: usize,
    pub c1_frac: f64,
    pub c2_frac: f64,
    pub pred_small: f64,
    pub pred_large: f64,
    pub merge_frac: f64,
    /// Replace every sample by full enumeration of its universe.
    pub exact_counters: bool,
    pub seed: u64,
    /// Largest recursion depth before the build gives up.
    pub depth_cap: usize,
}

impl SplitParams {
    /// Scaled constants for desk-size inputs.
    pub fn desk(n: usize) -> SplitParams {
        let l = ceil_log2(n);
        SplitParams {
            tau: 4 * l,
            eps: 0.05,
            sample_strong: 8 * l,
            sample_split: 8 * l,
            sample_orphan: 4 * l,
            c1_frac: 3.0 / 5.0,
            c2_frac: 1.0 / 6.0,
            pred_small: 3.0 / 2.0,
            pred_large: 2.0 / 3.0,
            merge_frac: 0.5,
            exact_counters: false,
            seed: 0,
            depth_cap: 4 * l * l * l,
        }
    }

    /// The literal asymptotic constants. Only meaningful for very large `n`:
    /// below about a million vertices the whole input is one super-vertex.
    pub fn paper(n: usize) -> SplitParams {
        let l = ceil_log2(n);
        let eps = 0.05;
        SplitParams {
            tau: 50_000 * l,
            sample_strong: (20.0 * l as f64 / (eps * eps)).ceil() as usize,
            sample_split: 500 * l,
            sample_orphan: 100 * l,
            depth_cap: 60_000 * l * l * l,
            eps,
            ..SplitParams::desk(n)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 0.1) {
            return Err(Error::invalid(format!("eps = {} outside (0, 0.1)", self.eps)));
        }
        if self.tau < 2 {
            return Err(Error::invalid("tau must be at least 2"));
        }
        if !self.exact_counters
            && (self.sample_strong == 0 || self.sample_split == 0 || self.sample_orphan == 0)
        {
            return Err(Error::invalid("sample sizes must be positive"));
        }
        Ok(())
    }
}

/// Result of one weak split.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SplitOutcome {
    /// Peeled subtree, restricted to the input set.
    pub t: Vec<usize>,
    pub remainder: Vec<usize>,
    /// Probe vertex whose counterpart set was peeled. It lies in the horizon
    /// but not necessarily in the input set.
    pub u_star: usize,
    /// Horizon to use for the remainder.
    pub horizon: Vec<usize>,
    pub root_split: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    SuperVertex,
    /// A strong-builder split.
    Split,
    Normal,
    OrphanPredecessor,
    RootRecursion,
}

/// One recursion node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub depth: usize,
    pub size: usize,
    pub horizon: usize,
    /// Size of the peeled set; zero for super-vertices.
    pub t_size: usize,
    pub branch: Branch,
    /// Queries issued by this node, children excluded.
    pub queries: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildTrace {
    pub records: Vec<TraceRecord>,
}

impl BuildTrace {
    pub fn max_depth(&self) -> usize {
        self.records.iter().map(|r| r.depth).max().unwrap_or(0)
    }

    pub fn total_queries(&self) -> u64 {
        self.records.iter().map(|r| r.queries).sum()
    }

    pub fn count(&self, branch: Branch) -> usize {
        self.records.iter().filter(|r| r.branch == branch).count()
    }

    /// One JSON object per line, in recursion preorder.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }
}

fn fail(reason: impl Into<String>) -> Error {
    Error::Fail {
        reason: reason.into(),
        trace: Box::default(),
    }
}

/// Marks which vertex ids belong to `set`, as local positions.
fn positions(set: &[usize], bound: usize) -> Vec<u32> {
    let mut pos = vec![NONE; bound];
    for (i, &v) in set.iter().enumerate() {
        pos[v] = i as u32;
    }
    pos
}

fn dedup_sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

fn difference(set: &[usize], remove: &[usize]) -> Vec<usize> {
    // Both sorted.
    let mut out = Vec::with_capacity(set.len());
    let mut j = 0;
    for &v in set {
        while j < remove.len() && remove[j] < v {
            j += 1;
        }
        if j >= remove.len() || remove[j] != v {
            out.push(v);
        }
    }
    out
}

fn intersection(set: &[usize], keep: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut j = 0;
    for &v in set {
        while j < keep.len() && keep[j] < v {
            j += 1;
        }
        if j < keep.len() && keep[j] == v {
            out.push(v);
        }
    }
    out
}

/// Tester counters over every triplet of a vertex set, from one query per
/// unordered triplet. `c1[u][v]` counts partners `t` for which `v` splits
/// away from `(u, t)`; `c2[u][v]` counts partners `t` that split away from
/// `(u, v)`.
pub struct PairCounts {
    members: Vec<usize>,
    pos: Vec<u32>,
    c1: Vec<u32>,
    c2: Vec<u32>,
}

impl PairCounts {
    /// Queries every triplet of `members` (sorted, distinct).
    pub fn fresh(oracle: &SplittingOracle, members: &[usize]) -> PairCounts {
        let h = members.len();
        let mut pc = PairCounts {
            members: members.to_vec(),
            pos: positions(members, oracle.truth().id_bound()),
            c1: vec![0; h * h],
            c2: vec![0; h * h],
        };
        for i in 0..h {
            let anchor = oracle.anchor(members[i], members);
            for j in i + 1..h {
                for k in j + 1..h {
                    let x = anchor.query(members[j], members[k]);
                    pc.apply(i, j, k, x);
                }
            }
        }
        pc
    }

    /// Counts for a subset. Either subtracts the triplets touching removed
    /// vertices or starts over, whichever needs fewer queries.
    pub fn derive(&self, oracle: &SplittingOracle, subset: &[usize]) -> PairCounts {
        let k = subset.len();
        let removed = difference(&self.members, subset);
        let subtract_cost = removed.len() as f64 * (k * k) as f64 / 2.0;
        let fresh_cost = (k * k * k) as f64 / 6.0;
        if fresh_cost <= subtract_cost {
            return PairCounts::fresh(oracle, subset);
        }
        let h = self.members.len();
        let local: Vec<usize> = subset.iter().map(|&v| self.pos[v] as usize).collect();
        let mut pc = PairCounts {
            members: subset.to_vec(),
            pos: positions(subset, self.pos.len()),
            c1: vec![0; k * k],
            c2: vec![0; k * k],
        };
        for (a, &la) in local.iter().enumerate() {
            for (b, &lb) in local.iter().enumerate() {
                pc.c1[a * k + b] = self.c1[la * h + lb];
                pc.c2[a * k + b] = self.c2[la * h + lb];
            }
        }
        for &r in &removed {
            let anchor = oracle.anchor(r, &self.members);
            for j in 0..k {
                for l in j + 1..k {
                    let x = anchor.query(subset[j], subset[l]);
                    if x != r {
                        pc.remove_partner(j, l, x == subset[j]);
                    } else {
                        // r splits away: (j, l) gain a c2 partner.
                        pc.c2[j * k + l] -= 1;
                        pc.c2[l * k + j] -= 1;
                    }
                }
            }
        }
        pc
    }

    /// Applies triplet `(i, j, k)` (local ids) whose answer is vertex `x`.
    fn apply(&mut self, i: usize, j: usize, k: usize, x: usize) {
        let xi = self.pos[x] as usize;
        let (y, z) = if xi == i {
            (j, k)
        } else if xi == j {
            (i, k)
        } else {
            (i, j)
        };
        let h = self.members.len();
        self.c1[y * h + xi] += 1;
        self.c1[z * h + xi] += 1;
        self.c2[y * h + z] += 1;
        self.c2[z * h + y] += 1;
    }

    /// Drops partner `r` from triplet `(j, l, r)` when the answer is `j`
    /// (`first`) or `l`: only `c1[other][answer]` stays inside the subset.
    fn remove_partner(&mut self, j: usize, l: usize, first: bool) {
        let k = self.members.len();
        let (x, y) = if first { (j, l) } else { (l, j) };
        self.c1[y * k + x] -= 1;
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// `(c1, c2)` for probe `u` and test vertex `v`, both members.
    pub fn get(&self, u: usize, v: usize) -> (u32, u32) {
        let h = self.members.len();
        let (a, b) = (self.pos[u] as usize, self.pos[v] as usize);
        (self.c1[a * h + b], self.c2[a * h + b])
    }

    /// Row of counters for probe `u`, indexed by member position.
    fn row(&self, u: usize) -> (&[u32], &[u32]) {
        let h = self.members.len();
        let a = self.pos[u] as usize;
        (&self.c1[a * h..a * h + h], &self.c2[a * h..a * h + h])
    }
}

/// Counterpart test against an explicit sample: counts over `t ∈ sample`,
/// skipping `t ∈ {u, v}`, how often `v` splits away from `(u, t)` (`c1`) and
/// `t` splits away from `(u, v)` (`c2`).
pub fn counterpart_test_strong(
    oracle: &SplittingOracle,
    u: usize,
    v: usize,
    sample: &[usize],
    thr1: f64,
    thr2: f64,
) -> Result<bool> {
    if u == v {
        return Err(Error::RepeatedVertex(u, v, v));
    }
    let (mut c1, mut c2) = (0usize, 0usize);
    for &t in sample {
        if t == u || t == v {
            continue;
        }
        let x = oracle.query(u, v, t)?;
        if x == v {
            c1 += 1;
        } else if x == t {
            c2 += 1;
        }
    }
    Ok(c1 as f64 <= thr1 && c2 as f64 <= thr2)
}

/// Counterpart test counting over the horizon set.
pub fn counterpart_test(
    oracle: &SplittingOracle,
    u: usize,
    v: usize,
    horizon: &[usize],
    thr1: f64,
    thr2: f64,
) -> Result<bool> {
    counterpart_test_strong(oracle, u, v, horizon, thr1, thr2)
}

/// Whether `t` splits away from `(u, s)` for at least `thr` partners `s` of
/// the horizon.
pub fn predecessor_test(
    oracle: &SplittingOracle,
    u: usize,
    t: usize,
    horizon: &[usize],
    thr: f64,
) -> Result<bool> {
    if u == t {
        return Err(Error::RepeatedVertex(u, t, t));
    }
    let mut c = 0usize;
    for &s in horizon {
        if s == u || s == t {
            continue;
        }
        if oracle.query(u, t, s)? == t {
            c += 1;
        }
    }
    Ok(c as f64 >= thr)
}

/// Horizon set with its shared counters in exact mode.
struct Horizon {
    members: Vec<usize>,
    counts: Option<PairCounts>,
}

struct Ctx<'a> {
    oracle: &'a SplittingOracle,
    params: &'a SplitParams,
    trace: BuildTrace,
}

impl<'a> Ctx<'a> {
    fn new(oracle: &'a SplittingOracle, params: &'a SplitParams) -> Ctx<'a> {
        Ctx {
            oracle,
            params,
            trace: BuildTrace::default(),
        }
    }

    fn queries(&self) -> u64 {
        self.oracle.query_count().total
    }

    fn record(&mut self, depth: usize, size: usize, horizon: usize, branch: Branch) -> usize {
        self.trace.records.push(TraceRecord {
            depth,
            size,
            horizon,
            t_size: 0,
            branch,
            queries: 0,
        });
        self.trace.records.len() - 1
    }

    fn horizon(&self, members: Vec<usize>, parent: Option<&Horizon>) -> Horizon {
        let counts = if self.params.exact_counters {
            Some(match parent.and_then(|p| p.counts.as_ref()) {
                Some(pc) => pc.derive(self.oracle, &members),
                None => PairCounts::fresh(self.oracle, &members),
            })
        } else {
            None
        };
        Horizon { members, counts }
    }

    // ---- strong ----

    fn strong(
        &mut self,
        set: Vec<usize>,
        counts: Option<PairCounts>,
        depth: usize,
    ) -> Result<PartialHCTree> {
        let p = self.params;
        if depth > p.depth_cap {
            return Err(fail(format!("recursion depth exceeded cap {}", p.depth_cap)));
        }
        let n_tilde = set.len();
        if n_tilde <= p.tau {
            self.record(depth, n_tilde, n_tilde, Branch::SuperVertex);
            return PartialHCTree::super_vertex(set, p.tau);
        }
        let before = self.queries();
        let idx = self.record(depth, n_tilde, n_tilde, Branch::Split);
        let best = match &counts {
            Some(pc) => self.strong_exact(&set, pc),
            None => self.strong_sampled(&set),
        };
        if best.is_empty() {
            return Err(fail(format!(
                "no counterpart set found at depth {depth} (size {n_tilde})"
            )));
        }
        let rest = difference(&set, &best);
        let (t_counts, r_counts) = match counts {
            Some(pc) => {
                let t = pc.derive(self.oracle, &best);
                let r = pc.derive(self.oracle, &rest);
                (Some(t), Some(r))
            }
            None => (None, None),
        };
        self.trace.records[idx].t_size = best.len();
        self.trace.records[idx].queries = self.queries() - before;
        let t_sub = self.strong(best, t_counts, depth + 1)?;
        let r_sub = self.strong(rest, r_counts, depth + 1)?;
        PartialHCTree::join(&t_sub, &r_sub, p.tau)
    }

    fn strong_exact(&self, set: &[usize], pc: &PairCounts) -> Vec<usize> {
        let p = self.params;
        let n = set.len() as f64;
        let thr1 = (p.c1_frac - p.eps) * n;
        let thr2 = (p.c2_frac - p.eps) * n;
        let mut best: Vec<usize> = Vec::new();
        for &u in set {
            let (c1, c2) = pc.row(u);
            let t: Vec<usize> = set
                .iter()
                .enumerate()
                .filter(|&(i, &v)| v != u && c1[i] as f64 <= thr1 && c2[i] as f64 <= thr2)
                .map(|(_, &v)| v)
                .collect();
            if t.len() > best.len() {
                best = t;
            }
        }
        best
    }

    fn strong_sampled(&self, set: &[usize]) -> Vec<usize> {
        let p = self.params;
        let n_tilde = set.len();
        // S is a set: drawn without replacement, so it never exceeds Ṽ.
        let s = p.sample_strong.min(n_tilde);
        let thr1 = (p.c1_frac - p.eps) * s as f64;
        let thr2 = (p.c2_frac - p.eps) * s as f64;
        let mut best: Vec<usize> = Vec::new();
        let mut c1 = vec![0u32; n_tilde];
        let mut c2 = vec![0u32; n_tilde];
        for &u in set {
            let mut rng = rng_for(p.seed, &[TAG_STRONG, set[0] as u64, n_tilde as u64, u as u64]);
            let mut picked = vec![false; n_tilde];
            for ti in index::sample(&mut rng, n_tilde, s) {
                picked[ti] = true;
            }
            c1.iter_mut().for_each(|c| *c = 0);
            c2.iter_mut().for_each(|c| *c = 0);
            let anchor = self.oracle.anchor(u, set);
            for (ti, &chosen) in picked.iter().enumerate() {
                let t = set[ti];
                if !chosen || t == u {
                    continue;
                }
                for (vi, &v) in set.iter().enumerate() {
                    if v == u || v == t {
                        continue;
                    }
                    let x = anchor.query(v, t);
                    if x == v {
                        c1[vi] += 1;
                    } else if x == t {
                        c2[vi] += 1;
                    }
                }
            }
            let t: Vec<usize> = set
                .iter()
                .enumerate()
                .filter(|&(i, &v)| v != u && c1[i] as f64 <= thr1 && c2[i] as f64 <= thr2)
                .map(|(_, &v)| v)
                .collect();
            if t.len() > best.len() {
                best = t;
            }
        }
        best
    }

    // ---- weak ----

    /// Tester counters of probe `u` over the horizon, by member position.
    fn probe_counts(&self, u: usize, horizon: &Horizon) -> (Vec<u32>, Vec<u32>) {
        if let Some(pc) = &horizon.counts {
            let (c1, c2) = pc.row(u);
            return (c1.to_vec(), c2.to_vec());
        }
        let h = &horizon.members;
        let mut c1 = vec![0u32; h.len()];
        let mut c2 = vec![0u32; h.len()];
        let anchor = self.oracle.anchor(u, h);
        for j in 0..h.len() {
            if h[j] == u {
                continue;
            }
            for k in j + 1..h.len() {
                if h[k] == u {
                    continue;
                }
                let x = anchor.query(h[j], h[k]);
                if x == h[j] {
                    c1[j] += 1;
                    c2[k] += 1;
                } else if x == h[k] {
                    c1[k] += 1;
                    c2[j] += 1;
                }
            }
        }
        (c1, c2)
    }

    fn counterpart_set(&self, u: usize, horizon: &Horizon) -> Vec<usize> {
        let p = self.params;
        let n_h = horizon.members.len() as f64;
        let (c1, c2) = self.probe_counts(u, horizon);
        horizon
            .members
            .iter()
            .enumerate()
            .filter(|&(i, &v)| {
                v != u && c1[i] as f64 <= p.c1_frac * n_h && c2[i] as f64 <= p.c2_frac * n_h
            })
            .map(|(_, &v)| v)
            .collect()
    }

    fn probes(&self, set: &[usize], count: usize, tag: u64, n_h: usize, flag: bool) -> Vec<usize> {
        if self.params.exact_counters {
            return set.to_vec();
        }
        let words = [tag, set[0] as u64, set.len() as u64, n_h as u64, flag as u64];
        let mut rng = rng_for(self.params.seed, &words);
        let mut picked: Vec<usize> = index::sample(&mut rng, set.len(), count.min(set.len()))
            .into_iter()
            .map(|i| set[i])
            .collect();
        picked.sort_unstable();
        picked
    }

    fn orphan_test(&self, set: &[usize], horizon: &Horizon, root_split: bool) -> Vec<usize> {
        let p = self.params;
        let n_tilde = set.len() as f64;
        let n_h = horizon.members.len();
        let thr = if n_h as f64 <= 3.0 * n_tilde {
            p.pred_small * n_tilde
        } else {
            p.pred_large * n_h as f64
        };
        let mut best: Vec<usize> = Vec::new();
        for u in self.probes(set, p.sample_orphan, TAG_ORPHAN, n_h, root_split) {
            let (c1, _) = self.probe_counts(u, horizon);
            let x: Vec<usize> = horizon
                .members
                .iter()
                .enumerate()
                .filter(|&(i, &v)| v != u && c1[i] as f64 >= thr)
                .map(|(_, &v)| v)
                .collect();
            if x.len() > best.len() {
                best = x;
            }
        }
        best
    }

    /// Returns the outcome, the horizon for the remainder, and the branch.
    fn split(
        &self,
        set: &[usize],
        horizon: Rc<Horizon>,
        root_split: bool,
    ) -> Result<(SplitOutcome, Rc<Horizon>, Branch)> {
        let p = self.params;
        let n_h = horizon.members.len();
        let mut best: (Vec<usize>, usize) = (Vec::new(), usize::MAX);
        for u in self.probes(set, p.sample_split, TAG_SPLIT, n_h, root_split) {
            let t = self.counterpart_set(u, &horizon);
            if best.1 == usize::MAX || t.len() > best.0.len() {
                best = (t, u);
            }
        }
        let (t_star, u_star) = best;
        let inside = intersection(&t_star, set);
        let branch = if root_split {
            Branch::RootRecursion
        } else {
            Branch::Normal
        };
        if !inside.is_empty() {
            return self.finish(set, inside, &t_star, u_star, horizon, root_split, branch);
        }
        let x_star = self.orphan_test(set, &horizon, root_split);
        if let Some(&u_star) = x_star.first() {
            let t_star = self.counterpart_set(u_star, &horizon);
            let inside = intersection(&t_star, set);
            if inside.is_empty() {
                return Err(fail(format!(
                    "orphan predecessor {u_star} has no counterpart in the current set"
                )));
            }
            let branch = if root_split {
                Branch::RootRecursion
            } else {
                Branch::OrphanPredecessor
            };
            return self.finish(set, inside, &t_star, u_star, horizon, root_split, branch);
        }
        if n_h == set.len() {
            return Err(fail(format!(
                "root split repeated on a set of size {}",
                set.len()
            )));
        }
        let own = Rc::new(self.horizon(set.to_vec(), Some(&horizon)));
        drop(horizon);
        self.split(set, own, true)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        set: &[usize],
        inside: Vec<usize>,
        t_star: &[usize],
        u_star: usize,
        horizon: Rc<Horizon>,
        root_split: bool,
        branch: Branch,
    ) -> Result<(SplitOutcome, Rc<Horizon>, Branch)> {
        let remainder = difference(set, t_star);
        if remainder.is_empty() {
            return Err(fail(format!(
                "split peeled the whole set of size {}",
                set.len()
            )));
        }
        let outcome = SplitOutcome {
            t: inside,
            remainder,
            u_star,
            horizon: horizon.members.clone(),
            root_split,
        };
        Ok((outcome, horizon, branch))
    }

    fn merge(
        &self,
        t_sub: &PartialHCTree,
        r_sub: &PartialHCTree,
        u_star: usize,
        t: &[usize],
        rest: &[usize],
    ) -> Result<PartialHCTree> {
        let mut universe: Vec<usize> = t.iter().chain(rest).copied().collect();
        universe.sort_unstable();
        let limit = self.params.merge_frac * t.len() as f64;
        let mut close = Vec::new();
        {
            let anchor = self.oracle.anchor(u_star, &universe);
            for &s in rest {
                if s == u_star {
                    close.push(s);
                    continue;
                }
                let c = t
                    .iter()
                    .filter(|&&x| x != u_star && anchor.query(s, x) == s)
                    .count();
                if c as f64 <= limit {
                    close.push(s);
                }
            }
        }
        if close.is_empty() {
            return Err(fail("merge found no vertex next to the peeled subtree"));
        }
        let x = r_sub.lca_set(&close)?;
        let mut under = r_sub.leaves_under(x);
        under.sort_unstable();
        if under != close {
            return Err(fail(format!(
                "merge set of size {} is not a subtree (lca spans {})",
                close.len(),
                under.len()
            )));
        }
        r_sub.graft_beside(x, t_sub)
    }

    fn weak(&mut self, set: Vec<usize>, horizon: Rc<Horizon>, depth: usize) -> Result<PartialHCTree> {
        let p = self.params;
        if depth > p.depth_cap {
            return Err(fail(format!("recursion depth exceeded cap {}", p.depth_cap)));
        }
        let n_tilde = set.len();
        if n_tilde <= p.tau {
            self.record(depth, n_tilde, horizon.members.len(), Branch::SuperVertex);
            return PartialHCTree::super_vertex(set, p.tau);
        }
        let before = self.queries();
        let idx = self.record(depth, n_tilde, horizon.members.len(), Branch::Normal);
        let (outcome, r_horizon, branch) = self.split(&set, horizon, false)?;
        let spent = self.queries() - before;
        let rec = &mut self.trace.records[idx];
        rec.branch = branch;
        rec.t_size = outcome.t.len();
        rec.queries = spent;
        let t_horizon = Rc::new(self.horizon(outcome.t.clone(), Some(&r_horizon)));
        let t_sub = self.weak(outcome.t.clone(), t_horizon, depth + 1)?;
        let r_sub = self.weak(outcome.remainder.clone(), r_horizon, depth + 1)?;
        let before = self.queries();
        let merged = self.merge(&t_sub, &r_sub, outcome.u_star, &outcome.t, &outcome.remainder)?;
        self.trace.records[idx].queries += self.queries() - before;
        Ok(merged)
    }
}

fn check_input(vertices: &[usize], oracle: &SplittingOracle, params: &SplitParams) -> Result<Vec<usize>> {
    params.validate()?;
    if vertices.is_empty() {
        return Err(Error::invalid("empty vertex set"));
    }
    let mut set = vertices.to_vec();
    set.sort_unstable();
    if let Some(w) = set.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::invalid(format!("vertex {} listed twice", w[0])));
    }
    if let Some(&v) = set.iter().find(|&&v| !oracle.truth().contains(v)) {
        return Err(Error::UnknownVertex(v));
    }
    Ok(set)
}

fn attach_trace<T>(result: Result<T>, trace: BuildTrace) -> Result<(T, BuildTrace)> {
    match result {
        Ok(value) => Ok((value, trace)),
        Err(Error::Fail { reason, .. }) => Err(Error::Fail {
            reason,
            trace: Box::new(trace),
        }),
        Err(e) => Err(e),
    }
}

/// Strongly consistent partial tree: every split peels the largest
/// counterpart set found over all probe vertices.
pub fn build_strong_partial(
    vertices: &[usize],
    oracle: &SplittingOracle,
    params: &SplitParams,
) -> Result<(PartialHCTree, BuildTrace)> {
    let set = check_input(vertices, oracle, params)?;
    with_big_stack(|| {
        let mut ctx = Ctx::new(oracle, params);
        let counts = (params.exact_counters && set.len() > params.tau)
            .then(|| PairCounts::fresh(oracle, &set));
        let result = ctx.strong(set, counts, 0);
        attach_trace(result, ctx.trace)
    })
}

/// Weakly consistent partial tree from the split/merge recursion.
pub fn build_weak_partial(
    vertices: &[usize],
    oracle: &SplittingOracle,
    params: &SplitParams,
) -> Result<(PartialHCTree, BuildTrace)> {
    let set = check_input(vertices, oracle, params)?;
    with_big_stack(|| {
        let mut ctx = Ctx::new(oracle, params);
        let horizon = if set.len() > params.tau {
            ctx.horizon(set.clone(), None)
        } else {
            Horizon {
                members: set.clone(),
                counts: None,
            }
        };
        let result = ctx.weak(set, Rc::new(horizon), 0);
        attach_trace(result, ctx.trace)
    })
}

fn sorted_checked(set: &[usize], what: &str) -> Result<Vec<usize>> {
    let sorted = dedup_sorted(set.to_vec());
    if sorted.len() != set.len() || sorted.is_empty() {
        return Err(Error::invalid(format!("{what} must be nonempty and distinct")));
    }
    Ok(sorted)
}

/// Largest predecessor set over the probe vertices drawn from `v_tilde`.
pub fn orphan_predecessor_test(
    oracle: &SplittingOracle,
    v_tilde: &[usize],
    v_h: &[usize],
    params: &SplitParams,
) -> Result<Vec<usize>> {
    let set = sorted_checked(v_tilde, "V_tilde")?;
    let h = sorted_checked(v_h, "horizon")?;
    if intersection(&set, &h).len() != set.len() {
        return Err(Error::invalid("the set must lie inside the horizon"));
    }
    let ctx = Ctx::new(oracle, params);
    let horizon = ctx.horizon(h, None);
    Ok(ctx.orphan_test(&set, &horizon, false))
}

/// One weak split of `v_tilde` against the horizon `v_h`.
pub fn tree_split(
    v_tilde: &[usize],
    v_h: &[usize],
    oracle: &SplittingOracle,
    params: &SplitParams,
) -> Result<SplitOutcome> {
    params.validate()?;
    let set = sorted_checked(v_tilde, "V_tilde")?;
    let h = sorted_checked(v_h, "horizon")?;
    if intersection(&set, &h).len() != set.len() {
        return Err(Error::invalid("the set must lie inside the horizon"));
    }
    let ctx = Ctx::new(oracle, params);
    let horizon = Rc::new(ctx.horizon(h, None));
    Ok(ctx.split(&set, horizon, false)?.0)
}

/// Attaches `t_sub` next to the subtree of `r_sub` holding the vertices that
/// stay close to `u_star` relative to the peeled set.
pub fn tree_merge(
    t_sub: &PartialHCTree,
    r_sub: &PartialHCTree,
    u_star: usize,
    oracle: &SplittingOracle,
    params: &SplitParams,
) -> Result<PartialHCTree> {
    let t = t_sub.vertices();
    let rest = r_sub.vertices();
    if !intersection(&t, &rest).is_empty() {
        return Err(Error::invalid("merged trees share vertices"));
    }
    for &v in t.iter().chain(&rest).chain([&u_star]) {
        if !oracle.truth().contains(v) {
            return Err(Error::UnknownVertex(v));
        }
    }
    Ctx::new(oracle, params).merge(t_sub, r_sub, u_star, &t, &rest)
}
