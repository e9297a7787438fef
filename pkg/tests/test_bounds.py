import itertools

import networkx as nx
import numpy as np
import pytest

from exactdag.bounds import (
    BoundState,
    astar_prune,
    build_F,
    build_G,
    build_pair_matrices,
    matching_bound,
    matching_certificate,
    max_weight_tree_matching,
    optimality_prune,
    tree_bound,
    tree_layout,
    update_best_concat,
    update_best_tree,
)
from exactdag.context import SearchContext
from exactdag.engine import SearchConfig, run_search
from exactdag.oracle import brute_force_best_order, brute_force_dormant_score, brute_force_pair_score
from exactdag.scores import ScoreProvider, compute_bge_capped
from exactdag.simulate import simulate_matching

from helpers import instance, random_capped, two_node, zero_tables


def spanning_trees(nodes):
    nodes = list(nodes)
    pairs = list(itertools.combinations(nodes, 2))
    for edges in itertools.combinations(pairs, len(nodes) - 1):
        g = nx.Graph()
        g.add_nodes_from(nodes)
        g.add_edges_from(edges)
        if nx.is_tree(g):
            yield edges


# ---------------------------------------------------------------- F and G


def test_F_two_node_and_zero():
    assert build_F(two_node()) == [[0, two_node().exact(1.0)], [two_node().exact(1.0), 0]]
    assert all(x == 0 for row in build_F(zero_tables(4)) for x in row)


@pytest.mark.parametrize("seed", range(15))
def test_F_matches_order_scores(seed):
    prov = random_capped(3 + seed % 4, seed, quantize=0.5 if seed % 2 else None)
    ctx = SearchContext(prov)
    F = build_F(prov)
    for i, j in itertools.permutations(range(prov.p), 2):
        gain_i = ctx.order_score((i, j)) - ctx.order_score((i,)) - ctx.order_score((j,))
        gain_j = ctx.order_score((j, i)) - ctx.order_score((i,)) - ctx.order_score((j,))
        assert F[i][j] == F[j][i] == min(gain_i, gain_j) >= 0


def test_G_two_node_and_zero():
    prov = two_node()
    G = build_G(prov)
    F = build_F(prov)
    assert G[0][1] == G[1][0] == prov.exact(-1.0) == -F[0][1]
    assert all(x == 0 for row in build_G(zero_tables(4)) for x in row)


@pytest.mark.parametrize("seed", range(15))
def test_G_matches_pair_enumeration(seed):
    prov = random_capped(3 + seed % 4, seed)
    ctx = SearchContext(prov)
    G = build_G(prov)
    for i, j in itertools.combinations(range(prov.p), 2):
        expected = brute_force_pair_score(prov, i, j) - ctx.full[i] - ctx.full[j]
        assert G[i][j] == G[j][i] == expected <= 0


def test_pair_matrices_to_numpy():
    F, G = build_pair_matrices(two_node()).to_numpy(two_node())
    assert np.array_equal(F, [[0, 1], [1, 0]]) and np.array_equal(G, [[0, -1], [-1, 0]])


# ---------------------------------------------------------------- tree and matching


def test_tree_bound_single_node():
    prov = random_capped(4, 1)
    ctx = SearchContext(prov)
    tree, f = tree_bound([2], build_F(prov), ctx.alone)
    assert tree == [] and f == ctx.alone[2]


def test_tree_bound_two_node():
    ctx = SearchContext(two_node())
    tree, f = tree_bound([0, 1], build_F(ctx), ctx.alone)
    assert tree == [(0, 1)] and f == ctx.provider.exact(1.0)


@pytest.mark.parametrize("seed", range(10))
def test_tree_bound_is_maximum_spanning_tree(seed):
    rng = np.random.default_rng(seed)
    p = 3 + seed % 5
    W = rng.integers(0, 4, size=(p, p))
    F = [[int(min(W[i][j], W[j][i])) if i != j else 0 for j in range(p)] for i in range(p)]
    base = {u: 0 for u in range(p)}
    tree, f = tree_bound(range(p), F, base)
    assert len(tree) == p - 1
    g = nx.Graph(tree)
    assert nx.is_tree(g) and set(g.nodes) == set(range(p))
    assert f == max(sum(F[a][b] for a, b in t) for t in spanning_trees(range(p)))


def test_matching_on_path():
    w = {(0, 1): 5, (1, 2): 1}
    m, total = max_weight_tree_matching([0, 1, 2], [(0, 1), (1, 2)], lambda a, b: w[(min(a, b), max(a, b))])
    assert m == [(0, 1)] and total == 5


@pytest.mark.parametrize("seed", range(20))
def test_matching_is_maximum_within_tree(seed):
    rng = np.random.default_rng(seed)
    p = 2 + seed % 7
    tree = [(int(rng.integers(0, v)), v) for v in range(1, p)]
    weights = {frozenset(e): int(rng.integers(-3, 10)) for e in tree}

    def w(a, b):
        return weights[frozenset((a, b))]

    m, total = max_weight_tree_matching(range(p), tree, w)
    used = [v for e in m for v in e]
    assert len(used) == len(set(used))
    assert total == sum(w(a, b) for a, b in m)
    best = 0
    for r in range(len(tree) + 1):
        for sub in itertools.combinations(tree, r):
            vs = [v for e in sub for v in e]
            if len(vs) == len(set(vs)):
                best = max(best, sum(w(a, b) for a, b in sub))
    assert total == best


def test_matching_bound_empty_tree():
    prov = random_capped(4, 2)
    ctx = SearchContext(prov)
    m, g = matching_bound([1], [], build_G(prov), ctx.full)
    assert m == [] and g == ctx.full[1]


@pytest.mark.parametrize("seed", range(40))
def test_bound_sandwich(seed):
    prov = instance(seed)
    ctx = SearchContext(prov)
    F, G = build_F(ctx), build_G(ctx)
    rng = np.random.default_rng(seed)
    perm = [int(x) for x in rng.permutation(prov.p)]
    for n in range(prov.p):
        visible = tuple(perm[:n])
        vmask = sum(1 << v for v in visible)
        dormant = ctx.dormant(vmask)
        tree, f = tree_bound(dormant, F, ctx.alone)
        _, g = matching_bound(dormant, tree, G, ctx.full)
        for left in (False, True):
            best = brute_force_dormant_score(prov, visible, left=left)
            assert f <= best <= g


# ---------------------------------------------------------------- pruning predicates


def test_astar_prune():
    assert not astar_prune(0, 1, None)
    assert astar_prune(0, 1, 1)
    assert not astar_prune(0, 2, 1)


def test_optimality_prune():
    assert optimality_prune(3, 3)
    assert not optimality_prune(2, 3)


def test_all_zero_certified_at_root():
    res = run_search(zero_tables(6), SearchConfig(dnc=False))
    assert res.stats.certified
    assert res.stats.total_suborders == 0
    assert res.stats.sigma_n == 6


def test_two_node_bounds_meet_at_root():
    ctx = SearchContext(two_node())
    tree, f = tree_bound([0, 1], build_F(ctx), ctx.alone)
    _, g = matching_bound([0, 1], tree, build_G(ctx), ctx.full)
    assert f == g == ctx.provider.exact(1.0)


# ---------------------------------------------------------------- updates


def test_update_best_tree_all_zero():
    ctx = SearchContext(zero_tables(4))
    F = build_F(ctx)
    state = BoundState()
    tree, f = tree_bound(range(4), F, ctx.alone)
    d = update_best_tree(ctx, (), 0, list(range(4)), tree, state)
    assert state.best_score == 0 == d
    assert sorted(state.best_order) == [0, 1, 2, 3]


@pytest.mark.parametrize("seed", range(20))
def test_update_best_tree_scores_exactly(seed):
    prov = instance(seed)
    ctx = SearchContext(prov)
    F = build_F(ctx)
    rng = np.random.default_rng(seed)
    perm = tuple(int(x) for x in rng.permutation(prov.p))
    visible = perm[: prov.p // 2]
    vmask = sum(1 << v for v in visible)
    dormant = ctx.dormant(vmask)
    tree, f = tree_bound(dormant, F, ctx.alone)
    for left in (False, True):
        state = BoundState()
        S = ctx.order_score(visible) if not left else _left_score(ctx, visible)
        d = update_best_tree(ctx, visible, S, dormant, tree, state, left)
        assert state.best_score == ctx.order_score(state.best_order)
        assert d >= f
        pos = {v: i for i, v in enumerate(state.best_order)}
        for a, b in tree:
            assert pos[a] > pos[b]  # tree parents sit to the right


def _left_score(ctx, visible):
    rest = ctx.universe & ~sum(1 << v for v in visible)
    total, right = 0, rest
    for v in reversed(visible):
        total += ctx.best(v, right)
        right |= 1 << v
    return total


def test_update_keeps_better_incumbent():
    prov = instance(7)
    ctx = SearchContext(prov)
    best = brute_force_best_order(prov, with_dags=False)
    state = BoundState(best.ooo, best.score)
    tree, f = tree_bound(range(prov.p), build_F(ctx), ctx.alone)
    update_best_tree(ctx, (), 0, list(range(prov.p)), tree, state)
    update_best_concat(ctx, (), 0, 0, state)
    assert (state.best_order, state.best_score) == (best.ooo, best.score)


def test_update_concat_suffix_is_identity():
    prov = instance(4)
    ctx = SearchContext(prov)
    order = tuple(range(prov.p))
    state = BoundState(order, ctx.order_score(order))
    suffix = order[2:]
    update_best_concat(ctx, suffix, sum(1 << v for v in suffix), ctx.order_score(suffix), state)
    assert state.best_order == order


def test_update_concat_improves():
    # incumbent <0, 1, 2>; node 2 gains 4 from parent 1 only if 1 sits behind it.
    scores = [{(): 0.0, (1,): 0.0, (2,): 0.0, (1, 2): 0.0}, {(): 0.0, (0,): 0.0, (2,): 0.0, (0, 2): 0.0},
              {(): 0.0, (0,): 0.0, (1,): 4.0, (0, 1): 4.0}]
    prov = ScoreProvider.from_parent_sets(("a", "b", "c"), scores)
    ctx = SearchContext(prov)
    state = BoundState((0, 1, 2), ctx.order_score((0, 1, 2)))
    assert state.best_score == 0
    suborder = (2, 1)
    d = update_best_concat(ctx, suborder, 0b110, ctx.order_score(suborder), state)
    assert state.best_order == (0, 2, 1) and state.best_score == prov.exact(4.0) and d == 0


def test_bound_state_monotone():
    state = BoundState()
    assert state.offer((0, 1), 5)
    assert not state.offer((1, 0), 4)
    assert state.best_score == 5
    other = BoundState((1, 0), 7)
    state.merge(other)
    assert state.best_score == 7


def test_tree_layout_parents_right():
    assert tree_layout([0, 1, 2, 3], [(0, 1), (1, 2), (0, 3)]) == (2, 3, 1, 0)
    assert tree_layout([], []) == ()


# ---------------------------------------------------------------- certificate


def test_certificate_all_zero():
    cert = matching_certificate(zero_tables(5))
    assert cert is not None and cert.dag.edges() == [] and cert.matching == []


def test_certificate_two_node():
    cert = matching_certificate(two_node())
    assert cert is not None
    assert cert.dag.edges() == [(0, 1)]
    assert cert.score == two_node().exact(1.0)


def test_certificate_absent_for_chain():
    # chain 0 - 1 - 2: node 1 gains from both neighbours, so the best tree is not a matching
    scores = [
        {(): 0.0, (1,): 2.0, (2,): 0.0, (1, 2): 2.0},
        {(): 0.0, (0,): 2.0, (2,): 2.0, (0, 2): 4.0},
        {(): 0.0, (0,): 0.0, (1,): 2.0, (0, 1): 2.0},
    ]
    prov = ScoreProvider.from_parent_sets(("a", "b", "c"), scores)
    assert matching_certificate(prov) is None


@pytest.mark.parametrize("seed", range(60))
def test_certificate_sound(seed):
    prov = instance(seed)
    cert = matching_certificate(prov)
    if cert is not None:
        assert cert.score == brute_force_best_order(prov, with_dags=False).score


@pytest.mark.parametrize("p", [2, 4, 6])
def test_certificate_on_simulated_matching(p):
    data, edges = simulate_matching(p, 10_000, seed=p)
    prov = compute_bge_capped(data, p - 1)
    cert = matching_certificate(prov)
    assert cert is not None
    assert sorted((min(e), max(e)) for e in cert.matching) == sorted((min(e), max(e)) for e in edges)
    assert cert.operations <= 8 * p * p
