"""Divide and conquer over provably independent node groups.

``Hmax[i][j]`` is the largest gain node ``i`` can get from adding ``j`` to an
admissible parent set, ``Hmin[i][j]`` the smallest.  Nodes not linked by any
positive ``Hmax`` never need each other as parents, so the connected
components of the ``Hmax > 0`` graph are searched independently.  Inside
each such component, the components of ``Hmin > 0`` are searched with every
other node of the enclosing component always available as a parent; groups
whose optimal parents form a cycle are merged and searched again.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import networkx as nx
import numpy as np

from .context import SearchContext
from .scores import ScoreProvider, mask_of, nodes_of


@dataclass
class HMatrices:
    """Exact gain matrices, ``H[child][parent]``, as p x p nested lists."""

    Hmax: list
    Hmin: list

    def to_numpy(self, provider: ScoreProvider) -> tuple[np.ndarray, np.ndarray]:
        conv = provider.to_float
        return (
            np.array([[conv(x) if x > provider.neg // 2 else -np.inf for x in row] for row in self.Hmax]),
            np.array([[conv(x) if x > provider.neg // 2 else -np.inf for x in row] for row in self.Hmin]),
        )


def build_H(provider: ScoreProvider) -> HMatrices:
    p = provider.p
    hmax = [[None] * p for _ in range(p)]
    hmin = [[None] * p for _ in range(p)]
    for i in range(p):
        entries = provider.exact_entries(i)
        rmax, rmin = hmax[i], hmin[i]
        for T, s in entries.items():
            for j in nodes_of(T):
                d = s - entries.get(T & ~(1 << j), provider.neg)
                if rmax[j] is None or d > rmax[j]:
                    rmax[j] = d
                if rmin[j] is None or d < rmin[j]:
                    rmin[j] = d
        for j in range(p):
            if rmax[j] is None:
                rmax[j] = rmin[j] = 0
    return HMatrices(hmax, hmin)


def _components(H, nodes) -> list[tuple[int, ...]]:
    g = nx.Graph()
    g.add_nodes_from(nodes)
    for i in nodes:
        for j in nodes:
            if i < j and (H[i][j] > 0 or H[j][i] > 0):
                g.add_edge(i, j)
    return sorted(tuple(sorted(c)) for c in nx.connected_components(g))


def upper_components(Hmax, nodes=None) -> list[tuple[int, ...]]:
    """Connected components of the graph with an edge wherever Hmax > 0."""
    return _components(Hmax, range(len(Hmax)) if nodes is None else nodes)


def lower_components(Hmin, nodes=None) -> list[tuple[int, ...]]:
    """Connected components of the graph with an edge wherever Hmin > 0."""
    return _components(Hmin, range(len(Hmin)) if nodes is None else nodes)


def _component_search(args):
    from .engine import _search_context, extract_dag

    provider, nodes, background, cfg = args
    ctx = SearchContext(provider, nodes, background)
    order, score, stats = _search_context(ctx, cfg)
    dag = extract_dag(order, ctx)
    return order, score, stats, {v: dag.parents[v] for v in nodes}


def _run_all(provider, jobs, cfg, workers):
    args = [(provider, tuple(sorted(A)), bg, cfg) for A, bg in jobs]
    if workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(args))) as pool:
            return list(pool.map(_component_search, args))
    return [_component_search(a) for a in args]


def dnc_search(provider: ScoreProvider, config=None):
    """Search each independent group separately and assemble the optimum."""
    from .engine import SearchConfig, SearchResult, SearchStats, canonicalize, extract_dag

    start = time.perf_counter()
    if config is None:
        config = SearchConfig()
    sub = replace(config, dnc=False)
    p = provider.p
    H = build_H(provider)
    upper = upper_components(H.Hmax)
    lower = lower_components(H.Hmin)
    cache = {}
    searches = 0
    prunes = {}
    total = 0
    order = []
    stage_counts = []
    certified = True
    final = []
    for U in upper:
        umask = mask_of(U)
        comps = sorted((frozenset(A) for A in lower if mask_of(A) & umask), key=min)
        for A in comps:
            if not A <= frozenset(U):
                raise AssertionError("lower component not inside its upper component")
        for _ in range(p + 1):
            todo = [A for A in comps if A not in cache]
            results = _run_all(provider, [(A, umask & ~mask_of(A)) for A in todo], sub, config.workers)
            for A, res in zip(todo, results):
                cache[A] = res
                searches += 1
                st = res[2]
                total += st.total_suborders
                for r, c in st.prunes.items():
                    prunes[r] = prunes.get(r, 0) + c
            where = {v: idx for idx, A in enumerate(comps) for v in A}
            graph = nx.DiGraph()
            graph.add_nodes_from(range(len(comps)))
            for idx, A in enumerate(comps):
                for v, pa in cache[A][3].items():
                    for q in pa:
                        if where[q] != idx:
                            graph.add_edge(idx, where[q])
            cycles = [c for c in nx.strongly_connected_components(graph) if len(c) > 1]
            if not cycles:
                break
            merged = set().union(*cycles)
            new = [comps[i] for i in range(len(comps)) if i not in merged]
            new += [frozenset().union(*(comps[i] for i in c)) for c in cycles]
            comps = sorted(new, key=min)
        else:
            raise AssertionError("component merging did not terminate")
        for idx in nx.lexicographical_topological_sort(graph, key=lambda i: min(comps[i])):
            res = cache[comps[idx]]
            final.append(comps[idx])
            order.extend(res[0])
            stage_counts.extend(res[2].stage_counts)
            certified = certified and (res[2].certified or len(comps[idx]) == 1)

    fragment_total = sum(cache[A][1] for A in final)
    ctx = SearchContext(provider)
    order = canonicalize(ctx, order)
    dag = extract_dag(order, ctx)
    if dag.score != fragment_total or not dag.is_acyclic():
        raise AssertionError("assembled DAG does not match its component scores")
    stats = SearchStats(
        stage_counts=stage_counts,
        prunes=prunes,
        wall_time=time.perf_counter() - start,
        certified=certified,
        searches=searches,
        total_suborders=total,
    )
    return SearchResult(tuple(order), dag, dag.score, provider.to_float(dag.score), provider.names, stats)
