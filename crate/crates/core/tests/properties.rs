use hcsplit_core::graph::{generate_planted, planted_tree, Graph, Profile, Shape};
use hcsplit_core::hctree::{check_strong_consistency, check_weak_consistency, HCTree, PartialHCTree};
use hcsplit_core::io;
use hcsplit_core::objectives::{dasgupta_cost, mw_revenue};
use hcsplit_core::oracle::{Adversary, OracleConfig, SplittingOracle};
use hcsplit_core::partial::{build_strong_partial, build_weak_partial, Branch, SplitParams};
use hcsplit_core::pipeline::{brute_force_opt, enumerate_trees, tree_count, Objective};
use hcsplit_core::sparsest::{cut_sparsity, exact_sparsest_cut, recursive_sparsest_tree};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn shape_strategy() -> impl Strategy<Value = Shape> {
    prop_oneof![Just(Shape::Random), Just(Shape::Balanced), Just(Shape::Caterpillar)]
}

fn random_graph(n: usize, seed: u64, density: f64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < density {
                edges.push((u, v, rng.random_range(0.1..10.0)));
            }
        }
    }
    Graph::new(n, edges).unwrap()
}

fn random_subset(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).filter(|_| rng.random_bool(0.6)).collect()
}

/// Recomputes laminarity from scratch: the leaf sets of any two nodes are
/// nested or disjoint, and every internal node has two children.
fn assert_laminar(t: &HCTree) {
    let sets: Vec<Vec<usize>> = (0..t.node_count())
        .map(|x| {
            let mut s = t.leaves_under(x).to_vec();
            s.sort_unstable();
            s
        })
        .collect();
    for a in &sets {
        for b in &sets {
            let common = a.iter().filter(|v| b.binary_search(v).is_ok()).count();
            assert!(common == 0 || common == a.len() || common == b.len());
        }
    }
    assert_eq!(t.internal_count() + 1, t.n());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn revenue_plus_cost_is_constant(n in 2usize..=24, seed: u64, shape in shape_strategy()) {
        let g = random_graph(n, seed, 0.5);
        let t = planted_tree(n, seed ^ 0x55, shape).unwrap();
        let cost = dasgupta_cost(&g, &t, None).unwrap().value;
        let rev = mw_revenue(&g, &t, None).unwrap().value;
        let expected = n as f64 * g.total_weight();
        prop_assert!((cost + rev - expected).abs() <= 1e-9 * expected.max(1.0));
    }

    #[test]
    fn per_edge_bounds(n in 2usize..=16, seed: u64) {
        let t = planted_tree(n, seed, Shape::Random).unwrap();
        for e in random_graph(n, seed, 0.7).edges() {
            let single = Graph::new(n, [(e.u, e.v, e.w)]).unwrap();
            let cost = dasgupta_cost(&single, &t, None).unwrap().value;
            let rev = mw_revenue(&single, &t, None).unwrap().value;
            prop_assert!(cost >= 2.0 * e.w - 1e-9 && cost <= n as f64 * e.w + 1e-9);
            prop_assert!(rev >= -1e-9 && rev <= (n - 2) as f64 * e.w + 1e-9);
        }
    }

    #[test]
    fn objectives_split_over_edge_partitions(n in 2usize..=16, seed: u64) {
        let g = random_graph(n, seed, 0.6);
        let t = planted_tree(n, seed, Shape::Random).unwrap();
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for (i, e) in g.edges().iter().enumerate() {
            if i % 3 == 0 { left.push((e.u, e.v, e.w)) } else { right.push((e.u, e.v, e.w)) }
        }
        let parts = [Graph::new(n, left).unwrap(), Graph::new(n, right).unwrap()];
        let whole = dasgupta_cost(&g, &t, None).unwrap().value;
        let sum: f64 = parts.iter().map(|p| dasgupta_cost(p, &t, None).unwrap().value).sum();
        prop_assert!((whole - sum).abs() <= 1e-9 * whole.max(1.0));
    }

    #[test]
    fn trees_are_laminar(n in 1usize..=40, seed: u64, shape in shape_strategy()) {
        let t = planted_tree(n.max(2), seed, shape).unwrap();
        assert_laminar(&t);
        prop_assert!(t.internal_count() <= t.n());
    }

    #[test]
    fn one_vertex_splits_away(n in 3usize..=20, seed: u64) {
        let t = planted_tree(n, seed, Shape::Random).unwrap();
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    let w = t.splits_away(a, b, c).unwrap();
                    prop_assert!(w == a || w == b || w == c);
                    // Exactly one member has the other two strictly deeper.
                    let depth = |x: usize, y: usize| t.depth(t.lca(x, y).unwrap());
                    let winners = [(a, b, c), (b, a, c), (c, a, b)]
                        .iter()
                        .filter(|&&(x, y, z)| depth(y, z) > depth(x, y) && depth(y, z) > depth(x, z))
                        .count();
                    prop_assert_eq!(winners, 1);
                    prop_assert_eq!(t.splits_away(c, a, b).unwrap(), w);
                    prop_assert_eq!(t.splits_away(b, c, a).unwrap(), w);
                }
            }
        }
    }

    #[test]
    fn restriction_keeps_split_order(n in 3usize..=16, seed: u64) {
        let t = planted_tree(n, seed, Shape::Random).unwrap();
        let set = random_subset(n, seed);
        prop_assume!(set.len() >= 3);
        let r = t.restrict(&set).unwrap();
        assert_laminar(&r);
        prop_assert_eq!(r.vertices(), set.clone());
        for (i, &a) in set.iter().enumerate() {
            for (j, &b) in set.iter().enumerate().skip(i + 1) {
                for &c in &set[j + 1..] {
                    prop_assert_eq!(r.splits_away(a, b, c).unwrap(), t.splits_away(a, b, c).unwrap());
                }
            }
        }
    }

    #[test]
    fn restriction_collapses(n in 3usize..=16, seed: u64) {
        let t = planted_tree(n, seed, Shape::Random).unwrap();
        let outer = random_subset(n, seed);
        prop_assume!(outer.len() >= 2);
        let inner = random_subset(outer.len(), seed.rotate_left(7))
            .into_iter()
            .map(|i| outer[i])
            .collect::<Vec<_>>();
        prop_assume!(inner.len() >= 2);
        let twice = t.restrict(&outer).unwrap().restrict(&inner).unwrap();
        prop_assert_eq!(twice, t.restrict(&inner).unwrap());
    }

    #[test]
    fn small_tree_levels_halve(n in 2usize..=40, seed: u64, shape in shape_strategy()) {
        let t = planted_tree(n, seed, shape).unwrap();
        let set = if seed % 2 == 0 { t.vertices() } else { random_subset(n, seed) };
        prop_assume!(set.len() >= 2);
        let order = t.small_tree_order(&set).unwrap();
        let mut all = order.order();
        all.sort_unstable();
        prop_assert_eq!(all, set.clone());
        let mut remaining = set.len();
        let last = order.levels.len() - 1;
        for (i, level) in order.levels.iter().enumerate() {
            if i < last {
                prop_assert!(2 * level.len() <= remaining);
            }
            remaining -= level.len();
        }
    }

    #[test]
    fn exact_cut_matches_second_enumeration(n in 2usize..=10, seed: u64) {
        let g = random_graph(n, seed, 0.5);
        let cut = exact_sparsest_cut(&g, 20).unwrap();
        // Enumerate by descending mask instead of the Gray walk.
        let mut best = f64::INFINITY;
        for mask in (1u32..(1 << n) - 1).rev() {
            let a: Vec<usize> = (0..n).filter(|v| mask >> v & 1 == 1).collect();
            let b: Vec<usize> = (0..n).filter(|v| mask >> v & 1 == 0).collect();
            best = best.min(cut_sparsity(&g, &a, &b));
        }
        prop_assert!((cut.sparsity - best).abs() <= 1e-9 * best.max(1.0));
        prop_assert!((cut_sparsity(&g, &cut.a, &cut.b) - cut.sparsity).abs() <= 1e-9 * best.max(1.0));
    }

    #[test]
    fn recursive_tree_is_complete(n in 1usize..=12, seed: u64) {
        let g = random_graph(n, seed, 0.4);
        let exact = |sub: &Graph| exact_sparsest_cut(sub, 20);
        let t = recursive_sparsest_tree(&g, &exact).unwrap();
        prop_assert_eq!(t.vertices(), (0..n).collect::<Vec<_>>());
        if n >= 2 {
            assert_laminar(&t);
        }
        prop_assert_eq!(recursive_sparsest_tree(&g, &exact).unwrap(), t);
    }

    #[test]
    fn induced_subgraph_relabels_back(n in 2usize..=20, seed: u64) {
        let g = random_graph(n, seed, 0.5);
        let set = random_subset(n, seed);
        prop_assume!(!set.is_empty());
        let (sub, map) = g.induced_subgraph(&set).unwrap();
        prop_assert_eq!(&map, &set);
        let back: Vec<(usize, usize, f64)> = sub.edges().iter().map(|e| (map[e.u], map[e.v], e.w)).collect();
        let expected: Vec<(usize, usize, f64)> = g
            .edges()
            .iter()
            .filter(|e| set.contains(&e.u) && set.contains(&e.v))
            .map(|e| (e.u, e.v, e.w))
            .collect();
        prop_assert_eq!(back, expected);
        let (all, _) = g.induced_subgraph(&(0..n).collect::<Vec<_>>()).unwrap();
        prop_assert_eq!(all, g);
    }

    #[test]
    fn oracle_is_symmetric_and_reproducible(seed: u64, p in 0.5f64..=1.0) {
        let t = planted_tree(30, seed, Shape::Random).unwrap();
        let adv = [Adversary::RandomWrong, Adversary::FixedMinWrong][(seed % 2) as usize].clone();
        let first = SplittingOracle::new(&t, OracleConfig::new(p, adv.clone(), seed)).unwrap();
        let second = SplittingOracle::new(&t, OracleConfig::new(p, adv, seed)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let (a, b, c) = (rng.random_range(0..30), rng.random_range(0..30), rng.random_range(0..30));
            if a == b || b == c || a == c {
                continue;
            }
            let ans = first.query(a, b, c).unwrap();
            prop_assert!(ans == a || ans == b || ans == c);
            prop_assert_eq!(first.query(c, a, b).unwrap(), ans);
            prop_assert_eq!(second.query(b, a, c).unwrap(), ans);
            if p == 1.0 {
                prop_assert_eq!(ans, t.splits_away(a, b, c).unwrap());
            }
        }
    }

    #[test]
    fn io_round_trips(n in 2usize..=30, seed: u64, shape in shape_strategy()) {
        let g = random_graph(n, seed, 0.3);
        prop_assert_eq!(io::graph_from_json(&io::graph_to_json(&g)).unwrap(), g.clone());
        prop_assert_eq!(io::graph_from_text(&io::graph_to_text(&g)).unwrap(), g);
        let t = planted_tree(n, seed, shape).unwrap();
        prop_assert_eq!(io::tree_from_json(&io::tree_to_json(&t)).unwrap(), t.clone());
        let p = PartialHCTree::from_tree(&t, 4);
        prop_assert_eq!(io::partial_from_json(&io::partial_to_json(&p)).unwrap().to_string(), p.to_string());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn perfect_builds_are_consistent(n in 8usize..=80, seed: u64, shape in shape_strategy()) {
        let inst = generate_planted(n, seed, &Profile::with_shape(shape)).unwrap();
        let oracle = SplittingOracle::new(&inst.tree, OracleConfig::perfect(seed)).unwrap();
        let mut params = SplitParams::desk(n);
        params.exact_counters = true;
        params.seed = seed;
        let vs = inst.tree.vertices();
        let (strong, _) = build_strong_partial(&vs, &oracle, &params).unwrap();
        prop_assert!(check_strong_consistency(&strong, &inst.tree).is_consistent());
        let (weak, trace) = build_weak_partial(&vs, &oracle, &params).unwrap();
        prop_assert!(check_weak_consistency(&weak, &inst.tree).is_consistent());
        // Rebuilding reproduces the same tree.
        let (again, _) = build_weak_partial(&vs, &oracle, &params).unwrap();
        prop_assert_eq!(again.to_string(), weak.to_string());
        // Splits taken over the whole current set peel a proper, nonempty part.
        for r in trace.records.iter().filter(|r| r.horizon == r.size) {
            if matches!(r.branch, Branch::Normal | Branch::OrphanPredecessor) {
                let size = r.size as f64;
                let upper = (1.0 - 1.0 / (10_000.0 * size.log2().powi(2))) * size;
                prop_assert!(r.t_size as f64 >= size / 200.0 && r.t_size as f64 <= upper);
            }
        }
        prop_assert!(weak.super_vertices().iter().all(|s| s.len() <= params.tau));
    }

    #[test]
    fn argmin_cost_is_argmax_revenue(n in 3usize..=6, seed: u64) {
        let g = random_graph(n, seed, 0.7);
        let das = brute_force_opt(&g, Objective::Das).unwrap();
        let mw = brute_force_opt(&g, Objective::Mw).unwrap();
        let total = n as f64 * g.total_weight();
        prop_assert!((das.value + mw.value - total).abs() <= 1e-9 * total.max(1.0));
        let mut seen = 0u64;
        let count = enumerate_trees(&g, |cost, rev| {
            seen += 1;
            assert!((cost + rev - total).abs() <= 1e-9 * total.max(1.0));
            assert!(cost >= das.value - 1e-9);
        })
        .unwrap();
        prop_assert_eq!(count, tree_count(n));
        prop_assert_eq!(seen, count);
    }
}
