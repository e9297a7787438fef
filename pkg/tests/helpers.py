"""Random score-table instances for tests."""

import itertools

import numpy as np

from exactdag.scores import ScoreProvider, SearchSpace


def names_for(p):
    return tuple(f"v{i}" for i in range(p))


def random_capped(p, seed, max_parents=3, quantize=None, sparsity=0.5, penalty=1.0):
    """Every parent set of size <= max_parents, with sparse pairwise gains.

    ``quantize`` rounds scores to multiples of that step, creating many ties.
    """
    rng = np.random.default_rng(seed)
    gains = rng.normal(0.0, 1.5, size=(p, p)) * (rng.random((p, p)) < sparsity)
    inter = rng.normal(0.0, 0.5, size=(p, p, p)) * (rng.random((p, p, p)) < 0.2)
    scores = []
    for i in range(p):
        others = [j for j in range(p) if j != i]
        base = rng.normal(0.0, 2.0)
        d = {}
        for r in range(min(max_parents, p - 1) + 1):
            for combo in itertools.combinations(others, r):
                s = base - penalty * r + sum(gains[i][j] for j in combo)
                s += sum(inter[i][a][b] for a, b in itertools.combinations(combo, 2))
                if quantize:
                    s = round(s / quantize) * quantize
                d[combo] = float(s)
        scores.append(d)
    return ScoreProvider.from_parent_sets(names_for(p), scores)


def random_space(p, seed, K=2, plus1=True, quantize=None):
    """Preselected-plus-one layout with random preselected sets."""
    rng = np.random.default_rng(seed)
    pre = []
    for i in range(p):
        others = [j for j in range(p) if j != i]
        k = int(rng.integers(0, min(K, p - 1) + 1))
        pre.append(frozenset(int(x) for x in rng.choice(others, size=k, replace=False)))
    space = SearchSpace(tuple(pre), (plus1,) * p)
    gains = rng.normal(0.0, 1.5, size=(p, p)) * (rng.random((p, p)) < 0.5)
    base = rng.normal(0.0, 2.0, size=p)

    def fn(i, parents):
        s = base[i] - len(parents) + sum(gains[i][j] for j in parents)
        if quantize:
            s = round(s / quantize) * quantize
        return s

    return ScoreProvider.from_space(names_for(p), space, fn)


def zero_tables(p, max_parents=None):
    scores = []
    for i in range(p):
        others = [j for j in range(p) if j != i]
        cap = p - 1 if max_parents is None else min(max_parents, p - 1)
        scores.append({c: 0.0 for r in range(cap + 1) for c in itertools.combinations(others, r)})
    return ScoreProvider.from_parent_sets(names_for(p), scores)


def two_node():
    """sigma(1|{})=0, sigma(1|{2})=1, sigma(2|{})=0, sigma(2|{1})=1 (nodes 0 and 1 here)."""
    return ScoreProvider.from_parent_sets(("1", "2"), [{(): 0.0, (1,): 1.0}, {(): 0.0, (0,): 1.0}])


def instance(idx):
    """Deterministic mix of instance shapes used by the oracle suites."""
    p = 4 + idx % 4
    kind = idx % 5
    if kind == 0:
        return random_capped(p, 1000 + idx)
    if kind == 1:
        return random_capped(p, 1000 + idx, quantize=1.0)
    if kind == 2:
        return random_capped(p, 1000 + idx, sparsity=0.25, penalty=2.0)
    if kind == 3:
        return random_space(p, 1000 + idx, K=3)
    return random_capped(p, 1000 + idx, max_parents=2, quantize=0.5, sparsity=0.3)


# criterion number -> (passed, detail); filled by test_acceptance, printed by conftest
ACCEPTANCE = {}
