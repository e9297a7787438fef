"""Search context: the node set being ordered and the always-available parents."""

from __future__ import annotations

from .scores import ScoreProvider, mask_of, nodes_of


class SearchContext:
    """Restriction of a provider to ``nodes``, with ``background`` parents.

    Every node in ``nodes`` may always take parents from ``background``
    regardless of where it sits in the order.  ``full[h]`` is the best score
    of ``h`` with every other node available, ``alone[h]`` the best score with
    only the background available.
    """

    def __init__(self, provider: ScoreProvider, nodes=None, background=0):
        self.provider = provider
        if nodes is None:
            nodes = range(provider.p)
        self.nodes = tuple(sorted(set(nodes)))
        if not self.nodes:
            raise ValueError("cannot search an empty node set")
        if isinstance(background, int):
            bg = background
        else:
            bg = mask_of(background)
        self.universe = mask_of(self.nodes)
        if bg & self.universe:
            raise ValueError("background overlaps the searched nodes")
        self.background = bg
        self.k = len(self.nodes)
        best = provider.best
        self.full = {h: best(h, (self.universe | bg) & ~(1 << h)) for h in self.nodes}
        self.alone = {h: best(h, bg) for h in self.nodes}

    def best(self, node: int, mask: int) -> int:
        """Best score of ``node`` with potential parents ``mask`` plus the background."""
        return self.provider.best(node, mask | self.background)

    def dormant(self, mask: int) -> list[int]:
        return nodes_of(self.universe & ~mask)

    def order_score(self, order) -> int:
        """Exact score of a full or partial order, listed front to back."""
        best = self.provider.best
        bg = self.background
        total = 0
        right = 0
        for v in reversed(order):
            total += best(v, right | bg)
            right |= 1 << v
        return total


class Dag:
    """Parent sets per node (node indices) with the exact total score."""

    __slots__ = ("p", "parents", "score")

    def __init__(self, p: int, parents, score: int):
        self.p = p
        self.parents = tuple(tuple(sorted(pa)) for pa in parents)
        self.score = score

    def edges(self) -> list[tuple[int, int]]:
        """(child, parent) pairs sorted by child then parent."""
        return [(c, q) for c in range(self.p) for q in self.parents[c]]

    def is_acyclic(self) -> bool:
        indeg = [len(pa) for pa in self.parents]
        children = [[] for _ in range(self.p)]
        for c, q in self.edges():
            children[q].append(c)
        # parents are removed first; count processed nodes
        stack = [v for v in range(self.p) if indeg[v] == 0]
        seen = 0
        while stack:
            v = stack.pop()
            seen += 1
            for c in children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    stack.append(c)
        return seen == self.p

    def __eq__(self, other):
        return isinstance(other, Dag) and (self.p, self.parents, self.score) == (other.p, other.parents, other.score)

    def __repr__(self):
        return f"Dag(p={self.p}, edges={self.edges()}, score={self.score})"


def dag_parents(ctx: SearchContext, order) -> tuple[list[tuple[int, int]], int]:
    """Best parents of each node of ``order`` from the nodes to its right.

    Returns ``[(node, parent_mask), ...]`` and the exact total score.
    """
    provider = ctx.provider
    bg = ctx.background
    out = []
    total = 0
    right = 0
    for v in reversed(order):
        s, pa = provider.best_parents(v, right | bg)
        out.append((v, pa))
        total += s
        right |= 1 << v
    out.reverse()
    return out, total
