"""Exhaustive reference implementations for small instances.

Nothing here uses the provider's lookup indices: the best parent set for a
potential-parent mask is found by scanning every listed parent set.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .scores import ScoreProvider, nodes_of

MAX_ORACLE_P = 10


class OracleTooLarge(ValueError):
    pass


class _Naive:
    def __init__(self, provider: ScoreProvider):
        self.provider = provider
        self.entries = [sorted(provider.exact_entries(i).items()) for i in range(provider.p)]
        self.cache = {}

    def best(self, node: int, mask: int) -> int:
        key = (node, mask)
        v = self.cache.get(key)
        if v is None:
            v = self.provider.neg
            for m, s in self.entries[node]:
                if m & ~mask == 0 and s > v:
                    v = s
            self.cache[key] = v
        return v

    def argmaxes(self, node: int, mask: int) -> list[int]:
        b = self.best(node, mask)
        return [m for m, s in self.entries[node] if m & ~mask == 0 and s == b]

    def order_score(self, order, background: int = 0) -> int:
        total = 0
        right = background
        for v in reversed(order):
            total += self.best(v, right)
            right |= 1 << v
        return total


@dataclass
class OracleResult:
    score: int
    score_float: float
    optimal_orders: list
    ooo: tuple
    optimal_dags: list


def brute_force_best_order(provider: ScoreProvider, nodes=None, background: int = 0,
                           with_dags: bool = True) -> OracleResult:
    """Enumerate every order of ``nodes`` (default: all nodes)."""
    nodes = tuple(range(provider.p)) if nodes is None else tuple(sorted(nodes))
    if len(nodes) > MAX_ORACLE_P:
        raise OracleTooLarge(f"brute force limited to {MAX_ORACLE_P} nodes")
    naive = _Naive(provider)
    best = None
    optimal = []
    for perm in itertools.permutations(nodes):
        s = naive.order_score(perm, background)
        if best is None or s > best:
            best, optimal = s, [perm]
        elif s == best:
            optimal.append(perm)
    ooo = max(optimal, key=lambda o: o[::-1])
    dags = []
    if with_dags:
        found = set()
        for perm in optimal:
            choices = []
            right = background
            for v in reversed(perm):
                choices.append([(v, m) for m in naive.argmaxes(v, right)])
                right |= 1 << v
            for combo in itertools.product(*choices):
                key = tuple(sorted(combo))
                if key not in found:
                    found.add(key)
        dags = [tuple((v, tuple(nodes_of(m))) for v, m in key) for key in sorted(found)]
    return OracleResult(best, provider.to_float(best), optimal, ooo, dags)


def brute_force_pair_score(provider: ScoreProvider, i: int, j: int, nodes=None) -> int:
    """Best joint score of ``i`` and ``j`` with every other node available."""
    if i == j:
        raise ValueError("pair needs two distinct nodes")
    naive = _Naive(provider)
    universe = sum(1 << v for v in (range(provider.p) if nodes is None else nodes))
    rest = universe & ~((1 << i) | (1 << j))
    return max(naive.best(i, rest | (1 << j)) + naive.best(j, rest),
               naive.best(j, rest | (1 << i)) + naive.best(i, rest))


def brute_force_insertions(provider: ScoreProvider, visible, nodes=None, background: int = 0,
                           left: bool = False) -> dict:
    """From-scratch insertion scores of every dormant node of a suborder.

    For right orders (``visible`` front to back, dormant nodes to the left)
    each entry is ``(front, inside, gap, behind)``; for left orders
    (dormant nodes to the right) it is ``(back, inside, gap, behind)``.
    ``inside`` is None when the suborder is empty.
    """
    nodes = tuple(range(provider.p)) if nodes is None else tuple(nodes)
    if len(nodes) > MAX_ORACLE_P:
        raise OracleTooLarge(f"brute force limited to {MAX_ORACLE_P} nodes")
    naive = _Naive(provider)
    visible = tuple(visible)
    vmask = sum(1 << v for v in visible)
    universe = sum(1 << v for v in nodes)
    dormant = [h for h in nodes if not (vmask >> h) & 1]
    n = len(visible)
    out = {}
    for h in dormant:
        others = universe & ~vmask & ~(1 << h)
        if not left:
            # dormant nodes other than h sit to the left and never act as parents
            def score(seq):
                return naive.order_score(seq, background)

            front = score((h,) + visible)
            placements = [visible[:k] + (h,) + visible[k:] for k in range(1, n + 1)]
            inside = max(score(s) for s in placements) if placements else None
            gap = naive.best(h, (universe | background) & ~(1 << h)) + score(visible)
            behind = score(visible[:1] + (h,) + visible[1:]) if n else None
        else:
            def score(seq, extra):
                return naive.order_score(seq, background | extra)

            front = score(visible + (h,), others)
            placements = [visible[:k] + (h,) + visible[k:] for k in range(n)]
            inside = max(score(s, others) for s in placements) if placements else None
            gap = score(visible, others | (1 << h)) + naive.best(h, background)
            behind = score(visible[:-1] + (h,) + visible[-1:], others) if n else None
        out[h] = (front, inside, gap, behind)
    return out


def brute_force_dormant_score(provider: ScoreProvider, visible, nodes=None, background: int = 0,
                              left: bool = False) -> int:
    """Best score of the dormant nodes over all their orderings."""
    nodes = tuple(range(provider.p)) if nodes is None else tuple(nodes)
    naive = _Naive(provider)
    vmask = sum(1 << v for v in visible)
    dormant = [h for h in nodes if not (vmask >> h) & 1]
    best = None
    for perm in itertools.permutations(dormant):
        if left:
            s = naive.order_score(perm, background)
        else:
            s = naive.order_score(perm, background | vmask)
        if best is None or s > best:
            best = s
    return 0 if best is None else best
