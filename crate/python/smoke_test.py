"""Smoke test for the hcsplit extension module.

Build and install first:  pip install --no-build-isolation -e crates/py
"""

import hcsplit


def main():
    graph, tree = hcsplit.planted(64, seed=3)
    assert graph.n == 64 and tree.n == 64
    assert abs(hcsplit.cost(graph, tree) + hcsplit.revenue(graph, tree) - 64 * graph.total_weight()) < 1e-6

    oracle = hcsplit.Oracle(tree, p=1.0, seed=3)
    assert oracle.query(0, 1, 2) == tree.splits_away(0, 1, 2)

    params = hcsplit.Params(64, exact_counters=True, seed=3)
    strong, trace = hcsplit.build_strong(oracle, params)
    assert strong.is_strongly_consistent(tree)
    assert trace.count("\n") >= 1
    weak, _ = hcsplit.build_weak(oracle, params)
    assert weak.is_weakly_consistent(tree)

    mw_tree = hcsplit.hc_mw(graph, oracle, params)
    assert sorted(mw_tree.vertices()) == list(range(64))
    params.tau = 16
    das_tree = hcsplit.hc_das(graph, oracle, params)
    assert hcsplit.HCTree.from_json(das_tree.to_json()) == das_tree

    small, small_tree = hcsplit.planted(7, seed=1)
    best, value = hcsplit.brute_force(small, "das")
    assert abs(value - hcsplit.cost(small, small_tree)) < 1e-9

    a, b, sparsity = hcsplit.sparsest_cut(hcsplit.Graph(4, [(0, 1, 1.0), (2, 3, 1.0)]))
    assert sparsity == 0.0 and sorted(a + b) == [0, 1, 2, 3]

    try:
        hcsplit.Graph(2, [(0, 0, 1.0)])
    except ValueError:
        pass
    else:
        raise AssertionError("self-loop accepted")

    print("hcsplit smoke test passed:", strong.tau, len(strong.super_vertices()), "super-vertices")


if __name__ == "__main__":
    main()
