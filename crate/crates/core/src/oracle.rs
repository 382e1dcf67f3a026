//! Noisy splitting oracle over a ground-truth tree.
//!
//! Answers are a pure function of the run seed and the unordered triplet, so
//! nothing is memoized: the corruption coin and the adversary's pick are both
//! drawn from a per-triplet hash.

use std::cell::Cell;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hctree::HCTree;
use crate::util::{hash_words, mix64};

/// How wrong answers are chosen when the corruption coin fires.
#[derive(Clone, Debug)]
pub enum Adversary {
    /// Uniform between the two incorrect vertices.
    RandomWrong,
    /// Always the smaller-id incorrect vertex.
    FixedMinWrong,
    /// Answers from a consistent wrong tree when it disagrees with the truth,
    /// otherwise the smaller-id incorrect vertex.
    AltTree(Arc<HCTree>),
}

impl Adversary {
    pub fn name(&self) -> &'static str {
        match self {
            Adversary::RandomWrong => "random_wrong",
            Adversary::FixedMinWrong => "fixed_min_wrong",
            Adversary::AltTree(_) => "alt_tree",
        }
    }
}

impl FromStr for Adversary {
    type Err = Error;

    /// Parses the two tree-free policies; `alt_tree` needs a tree and is
    /// built directly.
    fn from_str(s: &str) -> Result<Adversary> {
        match s.replace('-', "_").as_str() {
            "random_wrong" => Ok(Adversary::RandomWrong),
            "fixed_min_wrong" => Ok(Adversary::FixedMinWrong),
            _ => Err(Error::invalid(format!("unknown adversary {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleConfig {
    /// Probability of a correct answer, in `(1/2, 1]`.
    pub p: f64,
    pub adversary: Adversary,
    pub seed: u64,
    /// Track distinct triplets with a bitset of `C(n, 3)` bits.
    pub track_distinct: bool,
}

impl OracleConfig {
    pub fn new(p: f64, adversary: Adversary, seed: u64) -> OracleConfig {
        OracleConfig {
            p,
            adversary,
            seed,
            track_distinct: false,
        }
    }

    pub fn perfect(seed: u64) -> OracleConfig {
        OracleConfig::new(1.0, Adversary::RandomWrong, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.5 && self.p <= 1.0) {
            return Err(Error::invalid(format!("p = {} outside (1/2, 1]", self.p)));
        }
        Ok(())
    }
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig::new(0.9, Adversary::RandomWrong, 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct QueryCount {
    pub total: u64,
    /// `None` when distinct tracking is off.
    pub distinct: Option<u64>,
}

struct DistinctSet {
    bits: Vec<AtomicU64>,
    count: AtomicU64,
}

impl DistinctSet {
    fn new(bound: usize) -> DistinctSet {
        let b = bound as u64;
        let triplets = b * b.saturating_sub(1) * b.saturating_sub(2) / 6;
        let words = triplets.div_ceil(64) as usize;
        DistinctSet {
            bits: (0..words).map(|_| AtomicU64::new(0)).collect(),
            count: AtomicU64::new(0),
        }
    }

    fn mark(&self, a: usize, b: usize, c: usize) {
        let (a, b, c) = (a as u64, b as u64, c as u64);
        let idx = c * (c - 1) * (c - 2) / 6 + b * (b - 1) / 2 + a;
        let bit = 1u64 << (idx % 64);
        let prev = self.bits[(idx / 64) as usize].fetch_or(bit, Ordering::Relaxed);
        if prev & bit == 0 {
            self.count.fetch_add(1, Ordering::Relaxed);
        }
    }
}

pub struct SplittingOracle {
    truth: Arc<HCTree>,
    config: OracleConfig,
    seed_mix: u64,
    total: AtomicU64,
    distinct: Option<DistinctSet>,
}

impl SplittingOracle {
    pub fn new(truth: &HCTree, config: OracleConfig) -> Result<SplittingOracle> {
        SplittingOracle::from_arc(Arc::new(truth.clone()), config)
    }

    pub fn from_arc(truth: Arc<HCTree>, config: OracleConfig) -> Result<SplittingOracle> {
        config.validate()?;
        if let Adversary::AltTree(alt) = &config.adversary {
            if alt.vertices() != truth.vertices() {
                return Err(Error::invalid("adversary tree has a different vertex set"));
            }
        }
        let distinct = config
            .track_distinct
            .then(|| DistinctSet::new(truth.id_bound()));
        Ok(SplittingOracle {
            truth,
            seed_mix: mix64(config.seed),
            config,
            total: AtomicU64::new(0),
            distinct,
        })
    }

    pub fn truth(&self) -> &HCTree {
        &self.truth
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    /// Which of `u`, `v`, `w` splits away from the other two, per the oracle.
    pub fn query(&self, u: usize, v: usize, w: usize) -> Result<usize> {
        if u == v || u == w || v == w {
            return Err(Error::RepeatedVertex(u, v, w));
        }
        let truth = self.truth.splits_away(u, v, w)?;
        self.total.fetch_add(1, Ordering::Relaxed);
        let (a, b, c) = sort3(u, v, w);
        self.mark(a, b, c);
        Ok(self.corrupt(a, b, c, truth))
    }

    pub fn query_count(&self) -> QueryCount {
        QueryCount {
            total: self.total.load(Ordering::Relaxed),
            distinct: self
                .distinct
                .as_ref()
                .map(|d| d.count.load(Ordering::Relaxed)),
        }
    }

    #[inline]
    fn mark(&self, a: usize, b: usize, c: usize) {
        if let Some(d) = &self.distinct {
            d.mark(a, b, c);
        }
    }

    /// Per-triplet hash. Ids below 2^21 pack into one word and need a single
    /// mixing round.
    #[inline]
    fn triplet_hash(&self, a: usize, b: usize, c: usize) -> u64 {
        if c < 1 << 21 {
            mix64(self.seed_mix ^ (a as u64 | (b as u64) << 21 | (c as u64) << 42))
        } else {
            hash_words(self.config.seed, &[a as u64, b as u64, c as u64])
        }
    }

    /// Applies the noise channel to a correct answer for the sorted triplet.
    #[inline]
    fn corrupt(&self, a: usize, b: usize, c: usize, truth: usize) -> usize {
        if self.config.p >= 1.0 {
            return truth;
        }
        let h = self.triplet_hash(a, b, c);
        let coin = (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        if coin < self.config.p {
            return truth;
        }
        let (w1, w2) = if truth == a {
            (b, c)
        } else if truth == b {
            (a, c)
        } else {
            (a, b)
        };
        match &self.config.adversary {
            Adversary::RandomWrong => {
                if mix64(h) & 1 == 0 {
                    w1
                } else {
                    w2
                }
            }
            Adversary::FixedMinWrong => w1,
            Adversary::AltTree(alt) => {
                let x = alt.splits_away_unchecked(a, b, c);
                if x != truth {
                    x
                } else {
                    w1
                }
            }
        }
    }

    /// Query handle with a fixed probe vertex `u`, valid for partners drawn
    /// from `universe`. LCA depths to `u` are precomputed once so that each
    /// query is a hash and two comparisons.
    pub fn anchor(&self, u: usize, universe: &[usize]) -> Anchor<'_> {
        let truth = &self.truth;
        let mut depth = vec![0u32; truth.id_bound()];
        for &x in universe {
            if x != u {
                depth[x] = truth.lca_depth_unchecked(u, x);
            }
        }
        Anchor {
            oracle: self,
            u,
            depth,
            count: Cell::new(0),
        }
    }
}

/// Oracle handle bound to one probe vertex. Queries are counted locally and
/// flushed to the oracle on drop.
pub struct Anchor<'o> {
    oracle: &'o SplittingOracle,
    u: usize,
    depth: Vec<u32>,
    count: Cell<u64>,
}

impl Anchor<'_> {
    pub fn probe(&self) -> usize {
        self.u
    }

    /// Answer for the triplet `{u, v, t}`. `v`, `t` must be distinct from each
    /// other and from the probe, and lie in the anchor's universe.
    #[inline]
    pub fn query(&self, v: usize, t: usize) -> usize {
        debug_assert!(v != t && v != self.u && t != self.u);
        self.count.set(self.count.get() + 1);
        let (dv, dt) = (self.depth[v], self.depth[t]);
        let truth = if dv > dt {
            t
        } else if dt > dv {
            v
        } else {
            self.u
        };
        let (a, b, c) = sort3(self.u, v, t);
        self.oracle.mark(a, b, c);
        self.oracle.corrupt(a, b, c, truth)
    }
}

impl Drop for Anchor<'_> {
    fn drop(&mut self) {
        self.oracle
            .total
            .fetch_add(self.count.get(), Ordering::Relaxed);
    }
}

#[inline]
fn sort3(a: usize, b: usize, c: usize) -> (usize, usize, usize) {
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    if c < a {
        (c, a, b)
    } else if c < b {
        (a, c, b)
    } else {
        (a, b, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{planted_tree, Shape};

    fn tree() -> HCTree {
        planted_tree(30, 4, Shape::Random).unwrap()
    }

    #[test]
    fn perfect_oracle_matches_truth() {
        let t = tree();
        let o = SplittingOracle::new(&t, OracleConfig::perfect(1)).unwrap();
        for a in 0..30 {
            for b in a + 1..30 {
                for c in b + 1..30 {
                    assert_eq!(o.query(a, b, c).unwrap(), t.splits_away(a, b, c).unwrap());
                }
            }
        }
    }

    #[test]
    fn answers_ignore_argument_order() {
        let t = tree();
        let o = SplittingOracle::new(&t, OracleConfig::new(0.6, Adversary::RandomWrong, 3)).unwrap();
        for (a, b, c) in [(0, 5, 9), (3, 17, 29), (1, 2, 3)] {
            let x = o.query(a, b, c).unwrap();
            for (p, q, r) in [(a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                assert_eq!(o.query(p, q, r).unwrap(), x);
            }
        }
    }

    #[test]
    fn fixed_min_wrong_picks_smaller() {
        // Caterpillar over 0..10 in id order: the largest of any triplet
        // splits away, so the smallest wrong answer is the smallest id.
        let order: Vec<usize> = (0..10).collect();
        let t = HCTree::caterpillar(&order).unwrap();
        let o = SplittingOracle::new(&t, OracleConfig::new(0.51, Adversary::FixedMinWrong, 8))
            .unwrap();
        let mut wrong = 0;
        for a in 0..10 {
            for b in a + 1..10 {
                for c in b + 1..10 {
                    let x = o.query(a, b, c).unwrap();
                    if x != c {
                        assert_eq!(x, a);
                        wrong += 1;
                    }
                }
            }
        }
        assert!(wrong > 0);
    }

    #[test]
    fn alt_tree_equal_to_truth_acts_like_fixed_min() {
        let t = tree();
        let alt = OracleConfig::new(0.7, Adversary::AltTree(Arc::new(t.clone())), 5);
        let min = OracleConfig::new(0.7, Adversary::FixedMinWrong, 5);
        let a = SplittingOracle::new(&t, alt).unwrap();
        let b = SplittingOracle::new(&t, min).unwrap();
        for x in 0..30 {
            for y in x + 1..30 {
                for z in y + 1..30 {
                    assert_eq!(a.query(x, y, z).unwrap(), b.query(x, y, z).unwrap());
                }
            }
        }
    }

    #[test]
    fn random_wrong_splits_evenly() {
        let t = planted_tree(60, 2, Shape::Random).unwrap();
        let o = SplittingOracle::new(&t, OracleConfig::new(0.55, Adversary::RandomWrong, 7))
            .unwrap();
        let (mut low, mut high) = (0u32, 0u32);
        for a in 0..60 {
            for b in a + 1..60 {
                for c in b + 1..60 {
                    let truth = t.splits_away(a, b, c).unwrap();
                    let x = o.query(a, b, c).unwrap();
                    if x != truth {
                        let others: Vec<usize> =
                            [a, b, c].into_iter().filter(|&y| y != truth).collect();
                        if x == others[0] {
                            low += 1;
                        } else {
                            high += 1;
                        }
                    }
                }
            }
        }
        let frac = low as f64 / (low + high) as f64;
        assert!((frac - 0.5).abs() < 0.02, "fraction {frac}");
    }

    #[test]
    fn counters() {
        let t = tree();
        let mut cfg = OracleConfig::perfect(0);
        cfg.track_distinct = true;
        let o = SplittingOracle::new(&t, cfg).unwrap();
        assert_eq!(o.query_count(), QueryCount { total: 0, distinct: Some(0) });
        o.query(1, 2, 3).unwrap();
        o.query(3, 1, 2).unwrap();
        assert_eq!(o.query_count(), QueryCount { total: 2, distinct: Some(1) });
        assert!(o.query(1, 1, 2).is_err());
    }

    #[test]
    fn anchor_matches_query() {
        let t = tree();
        let o = SplittingOracle::new(&t, OracleConfig::new(0.8, Adversary::RandomWrong, 11))
            .unwrap();
        let universe: Vec<usize> = (0..30).collect();
        for u in [0, 7, 29] {
            let anchor = o.anchor(u, &universe);
            for v in 0..30 {
                for w in 0..30 {
                    if u != v && v != w && u != w {
                        assert_eq!(anchor.query(v, w), o.query(u, v, w).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_bad_p() {
        let t = tree();
        assert!(SplittingOracle::new(&t, OracleConfig::new(0.5, Adversary::RandomWrong, 0)).is_err());
        assert!(SplittingOracle::new(&t, OracleConfig::new(1.1, Adversary::RandomWrong, 0)).is_err());
    }
}
