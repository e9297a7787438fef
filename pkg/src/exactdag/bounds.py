"""Score bounds on the dormant part of a suborder.

The lower bound ``f`` comes from the best undirected spanning tree over the
pairwise edge gains ``F``; any tree is realised by some order, so ``f`` is
achievable.  The upper bound ``g`` starts from every dormant node taking its
best parents among all other nodes and subtracts, for a matching inside
that tree, the unavoidable loss ``G`` of ordering each matched pair.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .context import Dag, SearchContext, dag_parents
from .scores import ScoreProvider, nodes_of


@dataclass
class PairMatrices:
    """Exact pairwise matrices, indexed by node number (p x p nested lists)."""

    F: list
    G: list

    def to_numpy(self, provider: ScoreProvider) -> tuple[np.ndarray, np.ndarray]:
        conv = provider.to_float
        return (
            np.array([[conv(x) for x in row] for row in self.F]),
            np.array([[conv(x) for x in row] for row in self.G]),
        )


def _as_context(source) -> SearchContext:
    return source if isinstance(source, SearchContext) else SearchContext(source)


def build_F(source) -> list:
    """Edge gain of each pair, taking the smaller of the two directions.

    For score-equivalent scores both directions agree; the minimum keeps the
    tree bound valid for any score.
    """
    ctx = _as_context(source)
    p = ctx.provider.p
    F = [[0] * p for _ in range(p)]
    nodes = ctx.nodes
    for a, i in enumerate(nodes):
        for j in nodes[a + 1:]:
            gi = ctx.best(i, 1 << j) - ctx.alone[i]
            gj = ctx.best(j, 1 << i) - ctx.alone[j]
            F[i][j] = F[j][i] = min(gi, gj)
    return F


def build_G(source) -> list:
    """Best relative score of each pair with all other nodes available (<= 0)."""
    ctx = _as_context(source)
    p = ctx.provider.p
    G = [[0] * p for _ in range(p)]
    nodes = ctx.nodes
    u = ctx.universe
    for a, i in enumerate(nodes):
        for j in nodes[a + 1:]:
            rest = u & ~((1 << i) | (1 << j))
            G[i][j] = G[j][i] = max(ctx.best(j, rest) - ctx.full[j], ctx.best(i, rest) - ctx.full[i])
    return G


def build_pair_matrices(source) -> PairMatrices:
    ctx = _as_context(source)
    return PairMatrices(build_F(ctx), build_G(ctx))


def tree_bound(nodes, F, base) -> tuple[list[tuple[int, int]], int]:
    """Maximum spanning tree of ``F`` over ``nodes`` (Prim) and its bound.

    Returns the tree edges ``(parent_in_tree, node)`` in insertion order and
    ``f = sum of tree weights + sum of base[u]``.  Ties go to the lowest node.
    """
    nodes = sorted(nodes)
    f = sum(base[u] for u in nodes)
    if len(nodes) <= 1:
        return [], f
    root = nodes[0]
    rest = nodes[1:]
    row = F[root]
    key = {v: row[v] for v in rest}
    link = {v: root for v in rest}
    edges = []
    while key:
        v = max(key, key=lambda x: (key[x], -x))
        w = key.pop(v)
        edges.append((link.pop(v), v))
        f += w
        row = F[v]
        for x in key:
            if row[x] > key[x]:
                key[x] = row[x]
                link[x] = v
    return edges, f


def max_weight_tree_matching(nodes, edges, weight) -> tuple[list[tuple[int, int]], int]:
    """Maximum-weight matching using only the edges of a forest.

    ``weight(a, b)`` gives the edge weight.  Linear-time dynamic program over
    the forest rooted at the lowest node of each tree.  Returns the matched
    edges (sorted pairs, sorted) and the total weight.
    """
    adj = {v: [] for v in nodes}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    for v in adj:
        adj[v].sort()
    free = {}     # best value of subtree with v unmatched
    taken = {}    # best value of subtree with v possibly matched to a child
    choice = {}
    parent = {}
    seen = set()
    for root in sorted(adj):
        if root in seen:
            continue
        order = []
        stack = [root]
        parent[root] = None
        seen.add(root)
        while stack:
            v = stack.pop()
            order.append(v)
            for c in adj[v]:
                if c not in seen:
                    seen.add(c)
                    parent[c] = v
                    stack.append(c)
        for v in reversed(order):
            kids = [c for c in adj[v] if parent.get(c) == v and c != parent[v]]
            base = sum(taken[c] for c in kids)
            best, pick = base, None
            for c in kids:
                cand = base - taken[c] + free[c] + weight(v, c)
                if cand > best:
                    best, pick = cand, c
            free[v] = base
            taken[v] = best
            choice[v] = pick
    matching = []
    total = 0
    stack = [(r, True) for r in sorted(adj) if parent[r] is None]
    while stack:
        v, may_match = stack.pop()
        pick = choice[v] if may_match else None
        if pick is not None:
            matching.append((min(v, pick), max(v, pick)))
            total += weight(v, pick)
        for c in adj[v]:
            if parent.get(c) == v and c != parent[v]:
                stack.append((c, c != pick))
    matching.sort()
    return matching, total


def matching_bound(nodes, tree, G, full) -> tuple[list[tuple[int, int]], int]:
    """Tightest matching bound along ``tree``: ``g = sum full[u] + sum_M G``.

    Since ``G <= 0`` the matching that maximises ``-G`` minimises ``g``.
    """
    matching, gain = max_weight_tree_matching(nodes, tree, lambda a, b: -G[a][b])
    g = sum(full[u] for u in nodes) - gain
    return matching, g


def astar_prune(score: int, g: int, best_score) -> bool:
    """True if no completion of a suborder can beat the incumbent."""
    if best_score is None:
        return False
    return score + g <= best_score


def optimality_prune(f: int, g: int) -> bool:
    """True if the tree completion is provably optimal for the dormant part."""
    return f == g


class BoundState:
    """Incumbent full order; ties go to the canonical order."""

    __slots__ = ("best_order", "best_score")

    def __init__(self, best_order=None, best_score=None):
        self.best_order = best_order
        self.best_score = best_score

    def offer(self, order, score: int) -> bool:
        order = tuple(order)
        if self.best_score is None or (score, order[::-1]) > (self.best_score, self.best_order[::-1]):
            self.best_order, self.best_score = order, score
            return True
        return False

    def merge(self, other: "BoundState") -> "BoundState":
        if other.best_score is not None:
            self.offer(other.best_order, other.best_score)
        return self


def tree_layout(nodes, tree) -> tuple[int, ...]:
    """Order the tree's nodes so every tree parent sits right of its children.

    The tree is rooted at its lowest node and traversed breadth-first with
    neighbours in numeric order; the traversal is then reversed.
    """
    nodes = sorted(nodes)
    if not nodes:
        return ()
    adj = {v: [] for v in nodes}
    for a, b in tree:
        adj[a].append(b)
        adj[b].append(a)
    seen = set()
    out = []
    for root in nodes:
        if root in seen:
            continue
        seen.add(root)
        queue = deque([root])
        while queue:
            v = queue.popleft()
            out.append(v)
            for c in sorted(adj[v]):
                if c not in seen:
                    seen.add(c)
                    queue.append(c)
    return tuple(reversed(out))


def update_best_tree(ctx: SearchContext, visible, score: int, nodes, tree, state: BoundState,
                     left: bool = False) -> int:
    """Complete a suborder with the tree layout and offer it to the incumbent.

    Returns the exact score of the dormant part of the completion.
    """
    block = tree_layout(nodes, tree)
    cand = tuple(visible) + block if left else block + tuple(visible)
    total = ctx.order_score(cand)
    state.offer(cand, total)
    return total - score


def update_best_concat(ctx: SearchContext, visible, mask: int, score: int, state: BoundState,
                       left: bool = False):
    """Complete a suborder with the incumbent's remaining nodes in incumbent order.

    Returns the dormant-part score of the candidate, or None without an incumbent.
    """
    if state.best_order is None:
        return None
    rest = tuple(v for v in state.best_order if not (mask >> v) & 1)
    cand = tuple(visible) + rest if left else rest + tuple(visible)
    total = ctx.order_score(cand)
    state.offer(cand, total)
    return total - score


@dataclass
class Certificate:
    """A matching DAG proven optimal by the tree and matching bounds meeting."""

    order: tuple
    dag: Dag
    score: int
    matching: list
    operations: int


def matching_certificate(provider: ScoreProvider):
    """Prove optimality of a matching solution in O(p^2), or return None."""
    ctx = SearchContext(provider)
    p = provider.p
    nodes = ctx.nodes
    ops = 2 * p
    F = build_F(ctx)
    G = build_G(ctx)
    ops += 2 * p * p
    tree, f = tree_bound(nodes, F, ctx.alone)
    ops += p * p
    strong = [(a, b) for a, b in tree if F[a][b] != 0]
    degree = [0] * p
    for a, b in strong:
        degree[a] += 1
        degree[b] += 1
    ops += p
    if any(d > 1 for d in degree):
        return None
    matched = {(min(a, b), max(a, b)) for a, b in strong}
    for a, i in enumerate(nodes):
        for j in nodes[a + 1:]:
            ops += 1
            if (i, j) in matched:
                if G[i][j] != -F[i][j]:
                    return None
            elif F[i][j] != 0 or G[i][j] != 0:
                return None
    g = sum(ctx.full.values()) + sum(G[i][j] for i, j in matched)
    ops += p
    if f != g:
        return None
    partner = {}
    for i, j in matched:
        partner[i] = j
        partner[j] = i
    order = []
    for v in nodes:
        if v in partner and partner[v] < v:
            continue
        order.append(v)
        if v in partner:
            order.append(partner[v])
    parents, total = dag_parents(ctx, order)
    ops += p
    if total != f:
        return None
    pa = [()] * p
    for v, m in parents:
        pa[v] = tuple(nodes_of(m))
    return Certificate(tuple(order), Dag(p, pa, total), total, sorted(matched), ops)
