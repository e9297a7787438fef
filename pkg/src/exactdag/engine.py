"""Order-based dynamic programming with suborder pruning.

A *right order* fixes the back of a full order, ``visible = (v_n, ..., v_1)``
listed front to back; every node may take parents only from nodes to its
right, so the score of the visible part is final.  The remaining *dormant*
nodes will be placed to the left.  A *left order* fixes the front instead and
treats the dormant nodes as potential parents of every visible node.

Stage ``n`` holds at most one suborder per node set.  Among suborders that
tie, the search keeps the one whose sequence read back to front is
lexicographically largest; the final canonical order therefore has every
equal-score-transposable neighbour pair in increasing numeric order.

Each suborder carries per dormant node ``h`` the scores of the order with
``h`` inserted

* ``front``:  at the open end (front for right orders, back for left orders),
* ``inside``: best position strictly within the visible nodes or at the far end,
* ``behind``: next to the open-end node,
* ``gap``:    out of reach, i.e. with its best possible parent set.

All scores are exact integers (see :mod:`exactdag.scores`).
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field

from .bounds import (
    BoundState,
    astar_prune,
    build_F,
    build_G,
    matching_bound,
    optimality_prune,
    tree_bound,
    update_best_concat,
    update_best_tree,
)
from .context import Dag, SearchContext, dag_parents
from .scores import ScoreProvider, nodes_of

__all__ = [
    "SearchConfig",
    "SearchStats",
    "SearchResult",
    "RightOrder",
    "LeftOrder",
    "Dag",
    "InfeasibleError",
    "root_order",
    "extend_front",
    "extend_back",
    "update_insertion_scores",
    "no_right_gaps_candidates",
    "optimal_front",
    "ordered_front",
    "has_dormant_gap",
    "ordered_dormant_gap",
    "optimal_back",
    "ordered_back",
    "no_left_gaps",
    "prune_equal_sets",
    "canonicalize",
    "extract_dag",
    "run_search",
    "ALL_RULES",
]

ALL_RULES = frozenset(range(1, 13))


class InfeasibleError(RuntimeError):
    """No DAG has a finite score under the given tables."""


@dataclass(frozen=True)
class SearchConfig:
    """Which prunings, bound updates and decomposition to use.

    ``rules`` holds pruning numbers 1-12 (1 and 7 are the same-set
    deduplication, which is always applied); ``updates`` the incumbent
    updates 1 (tree completion) and 2 (incumbent reordering).  ``epsilon``
    relaxes only the strict-inequality prunings 2, 5 and 8.
    """

    rules: frozenset = ALL_RULES
    updates: frozenset = frozenset({1, 2})
    dnc: bool = True
    direction: str = "front"
    epsilon: float = 0.0
    bound_every: int = 1
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "rules", frozenset(self.rules))
        object.__setattr__(self, "updates", frozenset(self.updates))
        if self.direction not in ("front", "back"):
            raise ValueError("direction must be 'front' or 'back'")
        if not self.rules <= ALL_RULES:
            raise ValueError(f"unknown pruning rules {sorted(self.rules - ALL_RULES)}")
        if not self.updates <= {1, 2}:
            raise ValueError("updates must be a subset of {1, 2}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.bound_every < 1:
            raise ValueError("bound_every must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def uses_bounds(self) -> bool:
        return bool(self.updates) or 11 in self.rules or 12 in self.rules

    @classmethod
    def single(cls, rule: int | None = None, update: int | None = None, **kw) -> "SearchConfig":
        """Only deduplication plus one pruning rule and/or one update."""
        rules = {1} | ({rule} if rule is not None else set())
        updates = {update} if update is not None else set()
        kw.setdefault("dnc", False)
        return cls(rules=frozenset(rules), updates=frozenset(updates), **kw)


@dataclass
class SearchStats:
    stage_counts: list = field(default_factory=list)
    prunes: dict = field(default_factory=dict)
    wall_time: float = 0.0
    certified: bool = False
    searches: int = 1
    total_suborders: int = 0

    @property
    def sigma_n(self) -> int:
        return sum(self.stage_counts)


@dataclass
class SearchResult:
    order: tuple
    dag: Dag
    score: int
    score_float: float
    names: tuple
    stats: SearchStats

    def to_dict(self, timing: bool = True) -> dict:
        names = self.names
        out = {
            "nodes": list(names),
            "order": [names[v] for v in self.order],
            "score": self.score_float,
            "edges": [[names[c], names[q]] for c, q in self.dag.edges()],
            "sigma_n": self.stats.sigma_n,
            "stage_counts": list(self.stats.stage_counts),
            "prunes": {str(k): v for k, v in sorted(self.stats.prunes.items())},
            "certified": self.stats.certified,
            "searches": self.stats.searches,
            "total_suborders": self.stats.total_suborders,
        }
        if timing:
            out["wall_time"] = self.stats.wall_time
        return out


# --------------------------------------------------------------------------
# suborders


class RightOrder:
    __slots__ = ("visible", "mask", "score", "front", "inside", "gap", "behind", "parent")

    def __init__(self, visible, mask, score, parent=None):
        self.visible = visible
        self.mask = mask
        self.score = score
        self.parent = parent
        self.front = self.inside = self.gap = self.behind = None

    def __repr__(self):
        return f"RightOrder({self.visible}, score={self.score})"


class LeftOrder:
    __slots__ = ("visible", "mask", "score", "back", "inside", "gap", "behind", "parent")

    def __init__(self, visible, mask, score, parent=None):
        self.visible = visible
        self.mask = mask
        self.score = score
        self.parent = parent
        self.back = self.inside = self.gap = self.behind = None

    def __repr__(self):
        return f"LeftOrder({self.visible}, score={self.score})"


def root_order(ctx: SearchContext, left: bool = False):
    """The empty suborder with its insertion tables."""
    if left:
        o = LeftOrder((), 0, 0)
        o.back = dict(ctx.full)
        o.gap = dict(ctx.alone)
    else:
        o = RightOrder((), 0, 0)
        o.front = dict(ctx.alone)
        o.gap = dict(ctx.full)
    o.inside = dict.fromkeys(ctx.nodes)
    o.behind = dict.fromkeys(ctx.nodes)
    return o


def extend_front(order: RightOrder, j: int, ctx: SearchContext) -> RightOrder:
    """``<j, v_n..v_1>``; tables are filled by :func:`update_insertion_scores`."""
    bit = 1 << j
    if order.mask & bit or not ctx.universe & bit:
        raise ValueError(f"node {j} is not dormant")
    return RightOrder((j,) + order.visible, order.mask | bit, order.score + ctx.best(j, order.mask), order)


def extend_back(order: LeftOrder, j: int, ctx: SearchContext) -> LeftOrder:
    """``<v_1..v_n, j>`` with the remaining dormant nodes as j's potential parents."""
    bit = 1 << j
    if order.mask & bit or not ctx.universe & bit:
        raise ValueError(f"node {j} is not dormant")
    mask = order.mask | bit
    return LeftOrder(order.visible + (j,), mask, order.score + ctx.best(j, ctx.universe & ~mask), order)


def update_insertion_scores(order, ctx: SearchContext):
    """Refresh the insertion tables of a freshly extended suborder from its parent's."""
    parent = order.parent
    if parent is None:
        raise ValueError("order has no parent tables to update from")
    best = ctx.best
    S = order.score
    dormant = ctx.dormant(order.mask)
    inside, behind, gap = {}, {}, {}
    if isinstance(order, RightOrder):
        j = order.visible[0]
        pmask = parent.mask
        front = {}
        pf, pi = parent.front, parent.inside
        full = ctx.full
        for h in dormant:
            front[h] = best(h, order.mask) + S
            gap[h] = full[h] + S
            term = best(j, pmask | (1 << h))
            f = pf[h]
            behind[h] = term + f
            i = pi[h]
            inside[h] = term + (f if i is None or f >= i else i)
        order.front = front
    else:
        a = order.visible[-1]
        rest = ctx.universe & ~order.mask
        back = {}
        pb, pi = parent.back, parent.inside
        alone = ctx.alone
        for h in dormant:
            others = rest & ~(1 << h)
            back[h] = best(h, others) + S
            gap[h] = alone[h] + S
            term = best(a, others)
            b = pb[h]
            behind[h] = term + b
            i = pi[h]
            inside[h] = term + (b if i is None or b >= i else i)
        order.back = back
    order.inside, order.behind, order.gap = inside, behind, gap
    order.parent = None
    return order


# --------------------------------------------------------------------------
# right-order prunings


def no_right_gaps_candidates(order: RightOrder) -> list[int]:
    """Dormant nodes allowed at the front next.

    A dormant node that already attains its best score at the front can be
    moved there without loss, so no lower-numbered node may precede it.
    """
    front, gap = order.front, order.gap
    m = -1
    for h in front:
        if front[h] == gap[h] and h > m:
            m = h
    return sorted(h for h in front if h >= m)


def optimal_front(order: RightOrder, j: int, tol: int = 0) -> bool:
    """Keep unless ``j`` scores strictly better somewhere inside the order."""
    i = order.inside[j]
    return i is None or i <= order.front[j] + tol


def ordered_front(order: RightOrder, j: int) -> bool:
    """Keep unless ``j`` outranks the front node and swapping them is free."""
    if not order.visible or j < order.visible[0]:
        return True
    return order.behind[j] != order.front[j]


def has_dormant_gap(order: RightOrder, tol: int = 0) -> bool:
    """Prune if some dormant node does strictly better inside than anywhere left."""
    gap = order.gap
    for h, i in order.inside.items():
        if i is not None and i > gap[h] + tol:
            return True
    return False


def ordered_dormant_gap(order: RightOrder) -> bool:
    """Prune if a dormant node above the front node fits just behind it at no cost."""
    if not order.visible:
        return False
    v = order.visible[0]
    gap = order.gap
    for h, b in order.behind.items():
        if h > v and b == gap[h]:
            return True
    return False


# --------------------------------------------------------------------------
# left-order prunings


def optimal_back(order: LeftOrder, j: int, tol: int = 0) -> bool:
    """Keep unless ``j`` scores strictly better somewhere inside the order."""
    i = order.inside[j]
    return i is None or i <= order.back[j] + tol


def ordered_back(order: LeftOrder, j: int) -> bool:
    """Keep unless ``j`` ranks below the back node and swapping them is free."""
    if not order.visible or j > order.visible[-1]:
        return True
    return order.behind[j] != order.back[j]


def no_left_gaps(order: LeftOrder, j: int) -> bool:
    """Keep unless ``j`` gains nothing from dormant parents and is not the lowest dormant node.

    Such a node can be moved to the far end of the order for free.
    """
    if order.back[j] != order.gap[j]:
        return True
    return min(order.back) == j


# --------------------------------------------------------------------------
# deduplication


def _rank(order):
    return (order.score, order.visible[::-1])


def prune_equal_sets(orders) -> list:
    """One suborder per node set: the best, ties to the canonical sequence.

    Orders are split recursively on each node-membership bit; every final
    group shares one node set.  Survivors are returned sorted by node set.
    """
    orders = list(orders)
    if len(orders) <= 1:
        return orders
    union, common = 0, -1
    for o in orders:
        union |= o.mask
        common &= o.mask
    groups = [orders]
    varying = union & ~common
    while varying:
        bit = varying & -varying
        varying ^= bit
        split = []
        for grp in groups:
            if len(grp) == 1:
                split.append(grp)
                continue
            ones = [o for o in grp if o.mask & bit]
            if len(ones) == len(grp) or not ones:
                split.append(grp)
            else:
                split.append(ones)
                split.append([o for o in grp if not o.mask & bit])
        groups = split
    out = [grp[0] if len(grp) == 1 else max(grp, key=_rank) for grp in groups]
    out.sort(key=lambda o: o.mask)
    return out


# --------------------------------------------------------------------------
# search


def canonicalize(ctx: SearchContext, order) -> tuple:
    """Swap equal-score neighbours into increasing order until none remain."""
    order = list(order)
    best = ctx.best
    changed = True
    while changed:
        changed = False
        right = 0
        for i in range(len(order) - 2, -1, -1):
            a, b = order[i], order[i + 1]
            if a > b:
                cur = best(a, right | (1 << b)) + best(b, right)
                swp = best(b, right | (1 << a)) + best(a, right)
                if cur == swp:
                    order[i], order[i + 1] = b, a
                    changed = True
            right |= 1 << order[i + 1]
    return tuple(order)


def extract_dag(order, provider_or_ctx) -> Dag:
    """Best parents for each node among the nodes to its right."""
    ctx = provider_or_ctx if isinstance(provider_or_ctx, SearchContext) else SearchContext(provider_or_ctx)
    parents, total = dag_parents(ctx, order)
    pa = [()] * ctx.provider.p
    for v, m in parents:
        pa[v] = tuple(nodes_of(m))
    return Dag(ctx.provider.p, pa, total)


class _Bounds:
    def __init__(self, ctx: SearchContext, cfg: SearchConfig, state: BoundState, prunes: Counter, left: bool):
        self.ctx = ctx
        self.F = build_F(ctx)
        self.G = build_G(ctx)
        self.state = state
        self.prunes = prunes
        self.left = left
        self.rules = cfg.rules
        self.updates = cfg.updates

    def prune(self, order) -> bool:
        ctx = self.ctx
        dormant = ctx.dormant(order.mask)
        tree, f = tree_bound(dormant, self.F, ctx.alone)
        _, g = matching_bound(dormant, tree, self.G, ctx.full)
        S = order.score
        certified = 12 in self.rules and optimality_prune(f, g)
        reached = []
        if 1 in self.updates or certified:
            reached.append(update_best_tree(ctx, order.visible, S, dormant, tree, self.state, self.left))
        if 2 in self.updates:
            d = update_best_concat(ctx, order.visible, order.mask, S, self.state, self.left)
            if d is not None:
                reached.append(d)
        if 12 in self.rules and (certified or g in reached):
            self.prunes[12] += 1
            return True
        if 11 in self.rules and astar_prune(S, g, self.state.best_score):
            self.prunes[11] += 1
            return True
        return False


def _expand_right(frontier, ctx, rules, tol, prunes):
    children = []
    for par in frontier:
        if 4 in rules:
            cands = no_right_gaps_candidates(par)
            prunes[4] += len(par.front) - len(cands)
        else:
            cands = sorted(par.front)
        for j in cands:
            if 2 in rules and not optimal_front(par, j, tol):
                prunes[2] += 1
                continue
            if 3 in rules and not ordered_front(par, j):
                prunes[3] += 1
                continue
            children.append(RightOrder((j,) + par.visible, par.mask | (1 << j), par.front[j], par))
    return children


def _expand_left(frontier, ctx, rules, tol, prunes):
    children = []
    for par in frontier:
        for j in sorted(par.back):
            if 8 in rules and not optimal_back(par, j, tol):
                prunes[8] += 1
                continue
            if 9 in rules and not ordered_back(par, j):
                prunes[9] += 1
                continue
            if 10 in rules and not no_left_gaps(par, j):
                prunes[10] += 1
                continue
            children.append(LeftOrder(par.visible + (j,), par.mask | (1 << j), par.back[j], par))
    return children


def _search_context(ctx: SearchContext, cfg: SearchConfig, on_stage=None):
    """Run the stage loop on one context; returns (order, score, stats)."""
    start = time.perf_counter()
    provider = ctx.provider
    for h in ctx.nodes:
        if provider.is_infeasible(ctx.full[h]):
            raise InfeasibleError(f"node {provider.names[h]!r} has no admissible parent set")
    left = cfg.direction == "back"
    rules = cfg.rules
    tol = provider.exact_tolerance(cfg.epsilon)
    prunes = Counter()
    state = BoundState()
    bounds = _Bounds(ctx, cfg, state, prunes, left) if cfg.uses_bounds and ctx.k > 1 else None
    expand = _expand_left if left else _expand_right
    k = ctx.k

    frontier = [root_order(ctx, left)]
    certified = False
    if bounds is not None and bounds.prune(frontier[0]):
        # the bounds already prove the incumbent optimal
        frontier = []
        certified = True
    counts = []
    total = 0
    for n in range(1, k + 1):
        if frontier:
            children = expand(frontier, ctx, rules, tol, prunes)
            total += len(children)
            before = len(children)
            children = prune_equal_sets(children)
            prunes[1] += before - len(children)
            survivors = []
            last = n == k
            check_bounds = bounds is not None and not last and n % cfg.bound_every == 0
            for ch in children:
                if last:
                    ch.parent = None
                    survivors.append(ch)
                    continue
                update_insertion_scores(ch, ctx)
                if not left:
                    if 5 in rules and has_dormant_gap(ch, tol):
                        prunes[5] += 1
                        continue
                    if 6 in rules and ordered_dormant_gap(ch):
                        prunes[6] += 1
                        continue
                if check_bounds and bounds.prune(ch):
                    continue
                survivors.append(ch)
            frontier = survivors
        # a search resolved by the incumbent keeps one suborder per stage
        counts.append(len(frontier) if frontier or state.best_order is None else 1)
        if on_stage is not None:
            on_stage(n, list(frontier))

    for o in frontier:
        state.offer(o.visible, o.score)
    if state.best_order is None:
        raise InfeasibleError("every suborder was pruned")
    order = canonicalize(ctx, state.best_order)
    score = state.best_score
    if provider.is_infeasible(score):
        raise InfeasibleError("no DAG with a finite score exists")
    stats = SearchStats(
        stage_counts=counts,
        prunes=dict(prunes),
        wall_time=time.perf_counter() - start,
        certified=certified,
        searches=1,
        total_suborders=total,
    )
    return order, score, stats


def run_search(provider: ScoreProvider, config: SearchConfig | None = None, *, nodes=None, background=0,
               on_stage=None) -> SearchResult:
    """Find a highest-scoring order and DAG.

    With ``config.dnc`` (and no explicit ``nodes``) the problem is first
    split into independent components.  ``nodes``/``background`` restrict the
    search to a node subset whose members may always use the background
    nodes as parents.  ``on_stage(n, survivors)`` is called after each stage
    of a monolithic search with the suborders kept at that stage.
    """
    if config is None:
        config = SearchConfig()
    if provider.p == 0:
        raise ValueError("cannot search an empty node set")
    if config.dnc and nodes is None and not background:
        from .dnc import dnc_search

        return dnc_search(provider, config)
    ctx = SearchContext(provider, nodes, background)
    order, score, stats = _search_context(ctx, config, on_stage)
    dag = extract_dag(order, ctx)
    if dag.score != score:
        raise AssertionError("DAG score differs from order score")
    return SearchResult(order, dag, score, provider.to_float(score), provider.names, stats)
