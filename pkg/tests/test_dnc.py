import itertools

import networkx as nx
import numpy as np
import pytest

from exactdag.dnc import build_H, dnc_search, lower_components, upper_components
from exactdag.engine import SearchConfig, run_search
from exactdag.oracle import brute_force_best_order
from exactdag.scores import ScoreProvider, compute_bge_capped, mask_of
from exactdag.simulate import simulate

from helpers import instance, names_for, random_capped, two_node, zero_tables


def block_instance(groups, seed, cross=0.0):
    """Capped tables where nodes only gain from parents in their own group."""
    p = sum(len(g) for g in groups)
    rng = np.random.default_rng(seed)
    gains = rng.uniform(0.5, 2.0, size=(p, p))
    group_of = {v: k for k, g in enumerate(groups) for v in g}
    scores = []
    for i in range(p):
        others = [j for j in range(p) if j != i]
        d = {}
        for r in range(3):
            for combo in itertools.combinations(others, r):
                s = -0.3 * r
                for j in combo:
                    s += gains[i][j] if group_of[i] == group_of[j] else cross
                d[combo] = float(s)
        scores.append(d)
    return ScoreProvider.from_parent_sets(names_for(p), scores)


def brute_H(provider):
    """Gains by direct lookup over all admissible (T, j) pairs."""
    p = provider.p
    hmax = [[None] * p for _ in range(p)]
    hmin = [[None] * p for _ in range(p)]
    for i in range(p):
        sets = provider.parent_sets(i)
        admissible = {mask_of(ps): provider.exact(s) for ps, s in sets}
        for T, s in admissible.items():
            for j in range(p):
                if T >> j & 1:
                    d = s - admissible.get(T & ~(1 << j), provider.neg)
                    hmax[i][j] = d if hmax[i][j] is None else max(hmax[i][j], d)
                    hmin[i][j] = d if hmin[i][j] is None else min(hmin[i][j], d)
        for j in range(p):
            if hmax[i][j] is None:
                hmax[i][j] = hmin[i][j] = 0
    return hmax, hmin


def test_H_all_zero():
    H = build_H(zero_tables(5))
    assert all(x == 0 for row in H.Hmax + H.Hmin for x in row)


def test_H_two_node():
    prov = two_node()
    H = build_H(prov)
    one = prov.exact(1.0)
    assert H.Hmax[0][1] == H.Hmin[0][1] == H.Hmax[1][0] == H.Hmin[1][0] == one
    hmax, hmin = H.to_numpy(prov)
    assert hmax[0][1] == 1.0 and hmin[1][0] == 1.0


@pytest.mark.parametrize("seed", range(25))
def test_H_matches_enumeration(seed):
    prov = instance(seed)
    H = build_H(prov)
    hmax, hmin = brute_H(prov)
    assert H.Hmax == hmax and H.Hmin == hmin
    for i in range(prov.p):
        for j in range(prov.p):
            assert H.Hmin[i][j] <= H.Hmax[i][j]


def test_components_all_zero():
    H = build_H(zero_tables(5))
    assert upper_components(H.Hmax) == [(v,) for v in range(5)]
    assert lower_components(H.Hmin) == [(v,) for v in range(5)]


def test_components_two_node():
    H = build_H(two_node())
    assert upper_components(H.Hmax) == [(0, 1)]
    assert lower_components(H.Hmin) == [(0, 1)]


def test_components_block_diagonal():
    prov = block_instance([(0, 2, 4), (1, 3, 5)], seed=3)
    H = build_H(prov)
    assert upper_components(H.Hmax) == [(0, 2, 4), (1, 3, 5)]
    assert upper_components(H.Hmax, nodes=[0, 2, 4]) == [(0, 2, 4)]


@pytest.mark.parametrize("seed", range(20))
def test_lower_refines_upper(seed):
    H = build_H(instance(seed))
    upper = [set(c) for c in upper_components(H.Hmax)]
    for comp in lower_components(H.Hmin):
        assert any(set(comp) <= u for u in upper)


def test_dnc_all_zero():
    res = dnc_search(zero_tables(10), SearchConfig())
    assert res.score == 0 and res.dag.edges() == []
    assert res.stats.sigma_n == 10
    assert res.order == tuple(range(10))


def test_dnc_block_diagonal_matches_monolithic():
    prov = block_instance([(0, 3, 4), (1, 2, 5, 6)], seed=7)
    a = dnc_search(prov, SearchConfig())
    b = run_search(prov, SearchConfig(dnc=False))
    assert a.score == b.score
    assert a.dag.is_acyclic()
    assert a.stats.searches >= 2


@pytest.mark.parametrize("seed", range(60))
def test_dnc_matches_monolithic(seed):
    prov = instance(seed)
    a = run_search(prov, SearchConfig(dnc=True))
    b = run_search(prov, SearchConfig(dnc=False))
    assert a.score == b.score
    assert a.dag.is_acyclic()
    assert sum(prov.best(v, mask_of(a.dag.parents[v])) for v in range(prov.p)) == a.score


@pytest.mark.parametrize("seed", range(15))
def test_dnc_simulated(seed):
    data, _ = simulate(9, 1.0, 200, seed)
    prov = compute_bge_capped(data, 2)
    a = run_search(prov, SearchConfig(dnc=True))
    b = run_search(prov, SearchConfig(dnc=False))
    assert a.score == b.score
    assert a.dag.is_acyclic()


@pytest.mark.parametrize("seed", range(30))
def test_no_optimal_edge_between_upper_components(seed):
    prov = instance(seed)
    H = build_H(prov)
    comp = {v: k for k, c in enumerate(upper_components(H.Hmax)) for v in c}
    best = brute_force_best_order(prov)
    optimal = set(best.optimal_dags)
    for dag in best.optimal_dags:
        # cross-component parents never add score, so dropping them stays optimal
        pruned = tuple((c, tuple(q for q in parents if comp[q] == comp[c])) for c, parents in dag)
        assert pruned in optimal
    assert any(all(comp[c] == comp[q] for c, parents in dag for q in parents) for dag in optimal)


def full_space(p, seed):
    return random_capped(p, seed, max_parents=p - 1, sparsity=0.4)


@pytest.mark.parametrize("seed", range(25))
def test_positive_hmin_pairs_are_connected(seed):
    # contrapositive: nodes in different components of an optimal DAG never gain from each other for sure
    prov = full_space(3 + seed % 4, 500 + seed)
    H = build_H(prov)
    for dag in brute_force_best_order(prov).optimal_dags:
        g = nx.Graph()
        g.add_nodes_from(range(prov.p))
        g.add_edges_from((c, q) for c, parents in dag for q in parents)
        comp = {v: k for k, c in enumerate(nx.connected_components(g)) for v in c}
        for i, j in itertools.permutations(range(prov.p), 2):
            if comp[i] != comp[j]:
                assert H.Hmin[i][j] <= 0


def test_dnc_workers_match_serial():
    prov = block_instance([(0, 1, 2), (3, 4), (5, 6, 7)], seed=11)
    a = dnc_search(prov, SearchConfig(workers=1))
    b = dnc_search(prov, SearchConfig(workers=2))
    assert a.to_dict(timing=False) == b.to_dict(timing=False)
