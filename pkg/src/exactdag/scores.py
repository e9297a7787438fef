"""Local score tables and their queries.

A :class:`ScoreProvider` answers ``max_node_score(node, potential_parents)``:
the best local score of ``node`` over admissible parent sets contained in
``potential_parents``.  Two table layouts are supported:

* a *search-space* layout, where each node has a preselected candidate set
  (all subsets admissible) plus optionally one extra parent from outside it;
  lookups go through cumulative-max tables and cost O(p);
* an *explicit* layout holding an arbitrary list of admissible parent sets,
  as read from a score file; lookups scan the list in descending score order.

Internally every score is held as an exact integer: all table entries are
binary floats, so scaling them by a common power of two makes every sum of
entries exact.  Equality tests in the pruning rules rely on this.
"""

from __future__ import annotations

import csv
import itertools
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml
from scipy.special import multigammaln

__all__ = [
    "DataMatrix",
    "SearchSpace",
    "LocalScoreTable",
    "ScoreProvider",
    "ScoreFileError",
    "DegenerateDataError",
    "ParentSetSizeWarning",
    "compute_bge_tables",
    "compute_bge_capped",
    "bge_local_score",
    "load_score_file",
    "write_score_file",
    "max_node_score",
    "load_data_csv",
    "load_search_space",
    "write_search_space",
    "mask_of",
    "nodes_of",
]


class ScoreFileError(ValueError):
    """Malformed score file; ``lineno`` is 1-based."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class DegenerateDataError(ValueError):
    pass


class ParentSetSizeWarning(UserWarning):
    pass


def mask_of(nodes: Iterable[int]) -> int:
    m = 0
    for v in nodes:
        m |= 1 << v
    return m


def nodes_of(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def _tie_key(mask: int) -> tuple[int, tuple[int, ...]]:
    # smaller sets first, then lexicographically smallest node list
    nodes = tuple(nodes_of(mask))
    return (len(nodes), nodes)


# --------------------------------------------------------------------------
# data and search spaces


@dataclass(frozen=True)
class DataMatrix:
    """Samples in rows, variables in columns."""

    values: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("data must be a 2-d matrix")
        m, p = values.shape
        if p < 1 or m < 1:
            raise ValueError("data needs at least one row and one column")
        names = tuple(str(n) for n in self.names)
        if len(names) != p:
            raise ValueError(f"{len(names)} names for {p} columns")
        if len(set(names)) != p:
            raise ValueError("variable names must be unique")
        if not np.all(np.isfinite(values)):
            raise ValueError("data contains missing or non-finite entries")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def load_data_csv(path) -> DataMatrix:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty data file")
    names = [n.strip() for n in rows[0]]
    try:
        values = np.array([[float(x) for x in row] for row in rows[1:] if row], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if values.size == 0:
        raise ValueError(f"{path}: no samples")
    return DataMatrix(values, tuple(names))


@dataclass(frozen=True)
class SearchSpace:
    """Per-node preselected parent candidates and the plus-one flag."""

    preselected: tuple[frozenset, ...]
    plus1: tuple[bool, ...]

    def __post_init__(self):
        pre = tuple(frozenset(int(x) for x in s) for s in self.preselected)
        plus1 = tuple(bool(x) for x in self.plus1)
        if len(pre) != len(plus1):
            raise ValueError("preselected and plus1 lengths differ")
        p = len(pre)
        for i, s in enumerate(pre):
            if i in s:
                raise ValueError(f"node {i} is its own potential parent")
            if any(x < 0 or x >= p for x in s):
                raise ValueError(f"node {i}: preselected parent out of range")
        object.__setattr__(self, "preselected", pre)
        object.__setattr__(self, "plus1", plus1)

    @property
    def p(self) -> int:
        return len(self.preselected)

    @property
    def K(self) -> int:
        return max((len(s) for s in self.preselected), default=0)

    @classmethod
    def full(cls, p: int) -> "SearchSpace":
        """Every other node preselected; 2**(p-1) parent sets per node."""
        return cls(tuple(frozenset(set(range(p)) - {i}) for i in range(p)), (False,) * p)

    @classmethod
    def empty(cls, p: int, plus1: bool = True) -> "SearchSpace":
        return cls((frozenset(),) * p, (plus1,) * p)

    @classmethod
    def from_skeleton(cls, p: int, edges: Iterable[tuple[int, int]], plus1: bool = True) -> "SearchSpace":
        nb = [set() for _ in range(p)]
        for a, b in edges:
            nb[a].add(b)
            nb[b].add(a)
        return cls(tuple(frozenset(s) for s in nb), (plus1,) * p)


def load_search_space(path, names: Sequence[str]) -> SearchSpace:
    """Read a YAML mapping ``name -> {preselected: [...], plus1: bool}``."""
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: expected a mapping of variables")
    index = {n: i for i, n in enumerate(names)}
    pre = [frozenset()] * len(names)
    plus1 = [False] * len(names)
    for name, entry in doc.items():
        if str(name) not in index:
            raise ValueError(f"{path}: unknown variable {name!r}")
        entry = entry or {}
        i = index[str(name)]
        try:
            pre[i] = frozenset(index[str(x)] for x in entry.get("preselected", []) or [])
        except KeyError as exc:
            raise ValueError(f"{path}: unknown variable {exc.args[0]!r} in preselected set of {name!r}") from None
        plus1[i] = bool(entry.get("plus1", False))
    return SearchSpace(tuple(pre), tuple(plus1))


def write_search_space(space: SearchSpace, names: Sequence[str], path) -> None:
    doc = {
        names[i]: {"preselected": [names[j] for j in sorted(space.preselected[i])], "plus1": space.plus1[i]}
        for i in range(space.p)
    }
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


# --------------------------------------------------------------------------
# tables


@dataclass
class LocalScoreTable:
    """Float-valued local scores of one node.

    ``entries`` maps a parent-set bitmask to its score; absent sets are
    disallowed.  When ``preselected`` is set, the table follows the search
    space layout: every subset of ``preselected`` is present, and, with
    ``plus1``, every such subset extended by one outside node.
    """

    node: int
    entries: dict
    preselected: frozenset | None = None
    plus1: bool = False


class _SpaceIndex:
    __slots__ = ("pre_bits", "pre_mask", "outside_mask", "cum", "arg", "plus_cum", "plus_arg")

    def __init__(self, node: int, p: int, preselected, plus1: bool, exact: dict):
        pre = sorted(preselected)
        self.pre_bits = [1 << v for v in pre]
        self.pre_mask = mask_of(pre)
        K = len(pre)
        size = 1 << K

        def expand(idx: int) -> int:
            m = 0
            for k, b in enumerate(self.pre_bits):
                if idx >> k & 1:
                    m |= b
            return m

        full_masks = [expand(idx) for idx in range(size)]
        self.cum, self.arg = _cumulative(exact, full_masks, K, extra=0)
        self.outside_mask = 0
        self.plus_cum = {}
        self.plus_arg = {}
        if plus1:
            for h in range(p):
                if h == node or (self.pre_mask >> h) & 1:
                    continue
                self.outside_mask |= 1 << h
                self.plus_cum[h], self.plus_arg[h] = _cumulative(exact, full_masks, K, extra=1 << h)

    def index(self, mask: int) -> int:
        idx = 0
        for k, b in enumerate(self.pre_bits):
            if mask & b:
                idx |= 1 << k
        return idx

    def best(self, mask: int) -> int:
        idx = self.index(mask)
        best = self.cum[idx]
        out = mask & self.outside_mask
        while out:
            low = out & -out
            v = self.plus_cum[low.bit_length() - 1][idx]
            if v > best:
                best = v
            out ^= low
        return best

    def best_with_parents(self, mask: int) -> tuple[int, int]:
        idx = self.index(mask)
        best, arg = self.cum[idx], self.arg[idx]
        out = mask & self.outside_mask
        while out:
            low = out & -out
            h = low.bit_length() - 1
            v, a = self.plus_cum[h][idx], self.plus_arg[h][idx]
            if v > best or (v == best and _tie_key(a) < _tie_key(arg)):
                best, arg = v, a
            out ^= low
        return best, arg


def _cumulative(exact: dict, full_masks: list, K: int, extra: int):
    """Subset-lattice sweep: cum[S] = max over T subset of S of score(T | extra)."""
    cum = [exact[m | extra] for m in full_masks]
    arg = [m | extra for m in full_masks]
    for k in range(K):
        bit = 1 << k
        for idx in range(len(cum)):
            if idx & bit:
                sub = idx ^ bit
                v, a = cum[sub], arg[sub]
                if v > cum[idx] or (v == cum[idx] and _tie_key(a) < _tie_key(arg[idx])):
                    cum[idx], arg[idx] = v, a
    return cum, arg


class _ListIndex:
    __slots__ = ("ranked",)

    def __init__(self, exact: dict):
        self.ranked = sorted(exact.items(), key=lambda kv: (-kv[1], _tie_key(kv[0])))

    def best(self, mask: int) -> int | None:
        for m, s in self.ranked:
            if m & ~mask == 0:
                return s
        return None

    def best_with_parents(self, mask: int) -> tuple[int | None, int]:
        for m, s in self.ranked:
            if m & ~mask == 0:
                return s, m
        return None, 0


class ScoreProvider:
    """Immutable local-score model over ``p`` named variables.

    The exact integer value of a float score ``x`` is ``x * 2**scale_bits``;
    :meth:`to_float` maps exact values (including sums) back to floats.
    A disallowed parent set scores ``neg``, a sentinel far below any sum of
    finite entries; ``to_float`` reports sums containing it as ``-inf``.
    """

    def __init__(self, names: Sequence[str], tables: Sequence[LocalScoreTable], space: SearchSpace | None = None):
        self.names = tuple(str(n) for n in names)
        self.p = len(self.names)
        if len(set(self.names)) != self.p:
            raise ValueError("variable names must be unique")
        if len(tables) != self.p:
            raise ValueError(f"{len(tables)} tables for {self.p} variables")
        self.space = space
        self.tables = tuple(tables)

        shift = 0
        biggest = 1
        for t in self.tables:
            if t.node < 0 or t.node >= self.p:
                raise ValueError(f"table node {t.node} out of range")
            for m, x in t.entries.items():
                if (m >> t.node) & 1:
                    raise ValueError(f"node {t.node} listed as its own parent")
                if not math.isfinite(x):
                    continue
                num, den = float(x).as_integer_ratio()
                shift = max(shift, den.bit_length() - 1)
        self.scale_bits = shift
        self.denominator = 1 << shift
        exact_tables = []
        for t in self.tables:
            ex = {}
            for m, x in t.entries.items():
                if math.isfinite(x):
                    num, den = float(x).as_integer_ratio()
                    ex[m] = num << (shift - (den.bit_length() - 1))
                    biggest = max(biggest, abs(ex[m]))
            exact_tables.append(ex)
        self.neg = -(1 << (biggest.bit_length() + self.p.bit_length() + 16))
        self._threshold = self.neg // 2
        self._exact = tuple(exact_tables)

        self._index = []
        for t, ex in zip(self.tables, self._exact):
            if t.preselected is not None:
                filled = dict(ex)
                for m in _space_masks(t.node, self.p, t.preselected, t.plus1):
                    filled.setdefault(m, self.neg)
                self._index.append(_SpaceIndex(t.node, self.p, t.preselected, t.plus1, filled))
            else:
                self._index.append(_ListIndex(ex))
        self._memo = [dict() for _ in range(self.p)]

    # pickling drops the lookup memo
    def __getstate__(self):
        state = self.__dict__.copy()
        state["_memo"] = None
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._memo = [dict() for _ in range(self.p)]

    # ---- exact interface used by the search ----

    def best(self, node: int, mask: int) -> int:
        """Exact max local score of ``node`` with potential parents ``mask``."""
        memo = self._memo[node]
        v = memo.get(mask)
        if v is None:
            v = self._index[node].best(mask & ~(1 << node))
            if v is None:
                v = self.neg
            if len(memo) > 1_000_000:
                memo.clear()
            memo[mask] = v
        return v

    def best_parents(self, node: int, mask: int) -> tuple[int, int]:
        s, arg = self._index[node].best_with_parents(mask & ~(1 << node))
        if s is None:
            return self.neg, 0
        return s, arg

    def exact_entries(self, node: int) -> dict:
        """Parent-set mask -> exact score for every admissible set of ``node``."""
        return self._exact[node]

    def exact(self, x: float) -> int:
        if x == -math.inf:
            return self.neg
        num, den = float(x).as_integer_ratio()
        if den.bit_length() - 1 > self.scale_bits:
            raise ValueError(f"{x!r} is not representable at this provider's scale")
        return num << (self.scale_bits - (den.bit_length() - 1))

    def exact_tolerance(self, eps: float) -> int:
        """Smallest exact value >= eps (for strict-inequality slack)."""
        if eps <= 0:
            return 0
        return math.ceil(eps * self.denominator)

    def is_infeasible(self, value: int) -> bool:
        return value < self._threshold

    def to_float(self, value: int) -> float:
        if value < self._threshold:
            return -math.inf
        return value / self.denominator

    # ---- float interface ----

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(name) from None

    def local_score(self, node: int, parents: Iterable[int]) -> float:
        return self.tables[node].entries.get(mask_of(parents), -math.inf)

    def max_node_score(self, node: int, potential_parents) -> tuple[float, frozenset]:
        mask = potential_parents if isinstance(potential_parents, int) else mask_of(potential_parents)
        if (mask >> node) & 1:
            raise ValueError(f"node {node} cannot be its own potential parent")
        s, arg = self.best_parents(node, mask)
        return self.to_float(s), frozenset(nodes_of(arg))

    def parent_sets(self, node: int) -> list[tuple[tuple[int, ...], float]]:
        """Admissible (parents, score) pairs in (size, lexicographic) order."""
        items = [(m, x) for m, x in self.tables[node].entries.items() if math.isfinite(x)]
        items.sort(key=lambda kv: _tie_key(kv[0]))
        return [(tuple(nodes_of(m)), x) for m, x in items]

    @classmethod
    def from_parent_sets(cls, names: Sequence[str], scores: Sequence[dict]) -> "ScoreProvider":
        """Build from ``scores[i] = {parents (iterable): score}``."""
        tables = [
            LocalScoreTable(i, {mask_of(pa): float(s) for pa, s in d.items()}) for i, d in enumerate(scores)
        ]
        return cls(names, tables)

    @classmethod
    def from_space(cls, names: Sequence[str], space: SearchSpace, score_fn) -> "ScoreProvider":
        """Tabulate ``score_fn(node, parents_tuple)`` over a search space."""
        tables = []
        for i in range(space.p):
            entries = {}
            for m in _space_masks(i, space.p, space.preselected[i], space.plus1[i]):
                entries[m] = float(score_fn(i, tuple(nodes_of(m))))
            tables.append(LocalScoreTable(i, entries, space.preselected[i], space.plus1[i]))
        return cls(names, tables, space)


def _space_masks(node: int, p: int, preselected, plus1: bool):
    pre = sorted(preselected)
    outside = [h for h in range(p) if h != node and h not in preselected] if plus1 else []
    for r in range(len(pre) + 1):
        for combo in itertools.combinations(pre, r):
            base = mask_of(combo)
            yield base
            for h in outside:
                yield base | (1 << h)


def max_node_score(provider: ScoreProvider, node: int, potential_parents) -> tuple[float, frozenset]:
    """Best admissible parent set of ``node`` within ``potential_parents``."""
    return provider.max_node_score(node, potential_parents)


# --------------------------------------------------------------------------
# BGe


class _BGe:
    """Set marginal likelihoods of the BGe score (Normal-Wishart prior, zero prior mean)."""

    def __init__(self, data: DataMatrix, alpha_mu: float, alpha_w: float | None):
        X = data.values
        N, n = X.shape
        if N < 2:
            raise ValueError("BGe needs at least two samples")
        if alpha_mu <= 0:
            raise ValueError("alpha_mu must be positive")
        if alpha_w is None:
            alpha_w = n + alpha_mu + 1
        if alpha_w <= n - 1:
            raise ValueError(f"alpha_w must exceed p - 1 = {n - 1}")
        self.N, self.n = N, n
        self.am, self.aw = float(alpha_mu), float(alpha_w)
        t = self.am * (self.aw - n - 1) / (self.am + 1)
        if t <= 0:
            raise ValueError("alpha_w must exceed p + 1 for a proper prior scale")
        self.log_t = math.log(t)
        with np.errstate(over="ignore", invalid="ignore"):
            means = X.mean(axis=0)
            centred = X - means
            scatter = centred.T @ centred
            self.TN = t * np.eye(n) + scatter + (self.am * N / (self.am + N)) * np.outer(means, means)
        if not np.all(np.isfinite(self.TN)):
            raise DegenerateDataError("data too large for a finite scatter matrix")
        self.const = 0.5 * math.log(self.am / (self.am + N)) - 0.5 * N * math.log(math.pi)
        self._cache = {(): 0.0}
        self._warned = False

    def log_marginal(self, nodes: tuple[int, ...]) -> float:
        v = self._cache.get(nodes)
        if v is not None:
            return v
        l = len(nodes)
        if l > self.N and not self._warned:
            warnings.warn(
                f"parent set of size {l - 1} with only {self.N} samples", ParentSetSizeWarning, stacklevel=3
            )
            self._warned = True
        idx = np.array(nodes)
        sign, logdet = np.linalg.slogdet(self.TN[np.ix_(idx, idx)])
        if sign <= 0 or not math.isfinite(logdet):
            raise DegenerateDataError(f"posterior scatter matrix singular on variables {list(nodes)}")
        a_prior = (self.aw - self.n + l) / 2
        a_post = (self.aw + self.N - self.n + l) / 2
        v = (
            l * self.const
            + float(multigammaln(a_post, l))
            - float(multigammaln(a_prior, l))
            + a_prior * l * self.log_t
            - a_post * logdet
        )
        self._cache[nodes] = v
        return v

    def local(self, node: int, parents: tuple[int, ...]) -> float:
        parents = tuple(sorted(parents))
        family = tuple(sorted(parents + (node,)))
        return self.log_marginal(family) - self.log_marginal(parents)


def bge_local_score(data: DataMatrix, node: int, parents: Iterable[int], alpha_mu: float = 0.1,
                    alpha_w: float | None = None) -> float:
    """One-off BGe local score; use :func:`compute_bge_tables` for tables."""
    return _BGe(data, alpha_mu, alpha_w).local(node, tuple(parents))


def compute_bge_tables(data: DataMatrix, space: SearchSpace, alpha_mu: float = 0.1,
                       alpha_w: float | None = None) -> ScoreProvider:
    """BGe local scores over a preselected + plus-one search space.

    ``alpha_w`` defaults to ``p + alpha_mu + 1``.
    """
    if space.p != data.p:
        raise ValueError(f"search space has {space.p} nodes, data has {data.p} columns")
    bge = _BGe(data, alpha_mu, alpha_w)
    return ScoreProvider.from_space(data.names, space, bge.local)


def compute_bge_capped(data: DataMatrix, max_parents: int, alpha_mu: float = 0.1,
                       alpha_w: float | None = None) -> ScoreProvider:
    """BGe local scores for every parent set of size <= ``max_parents``."""
    if max_parents < 0:
        raise ValueError("max_parents must be non-negative")
    bge = _BGe(data, alpha_mu, alpha_w)
    p = data.p
    scores = []
    for i in range(p):
        others = [j for j in range(p) if j != i]
        d = {}
        for r in range(min(max_parents, p - 1) + 1):
            for combo in itertools.combinations(others, r):
                d[combo] = bge.local(i, combo)
        scores.append(d)
    return ScoreProvider.from_parent_sets(data.names, scores)


# --------------------------------------------------------------------------
# score files


def load_score_file(path) -> ScoreProvider:
    """Parse the ``p`` / ``name count`` / ``score k parents...`` format."""
    with open(path) as fh:
        raw = fh.read().splitlines()
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(raw)]
    lines = [(no, ln) for no, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ScoreFileError("empty score file", 1)
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            raise ScoreFileError("unexpected end of file", raw and len(raw) or 1)
        item = lines[pos]
        pos += 1
        return item

    no, ln = take()
    try:
        p = int(ln)
    except ValueError:
        raise ScoreFileError(f"expected variable count, got {ln!r}", no) from None
    if p < 1:
        raise ScoreFileError("variable count must be positive", no)

    blocks = []
    for _ in range(p):
        no, ln = take()
        parts = ln.split()
        if len(parts) != 2:
            raise ScoreFileError(f"expected 'name count', got {ln!r}", no)
        name = parts[0]
        try:
            count = int(parts[1])
        except ValueError:
            raise ScoreFileError(f"bad parent-set count {parts[1]!r}", no) from None
        if count < 0:
            raise ScoreFileError("negative parent-set count", no)
        rows = []
        for _ in range(count):
            rno, rln = take()
            toks = rln.split()
            if len(toks) < 2:
                raise ScoreFileError(f"expected 'score k parents...', got {rln!r}", rno)
            try:
                score = float(toks[0])
                k = int(toks[1])
            except ValueError:
                raise ScoreFileError(f"malformed score line {rln!r}", rno) from None
            if k < 0 or len(toks) != k + 2:
                raise ScoreFileError(f"parent count {k} does not match {len(toks) - 2} listed parents", rno)
            if math.isnan(score):
                raise ScoreFileError("score is NaN", rno)
            rows.append((rno, score, toks[2:]))
        blocks.append((no, name, rows))
    if pos != len(lines):
        raise ScoreFileError("trailing content after last variable block", lines[pos][0])

    names = [b[1] for b in blocks]
    index = {}
    for no, name, _ in blocks:
        if name in index:
            raise ScoreFileError(f"duplicate variable {name!r}", no)
        index[name] = len(index)
    tables = []
    for i, (no, name, rows) in enumerate(blocks):
        entries = {}
        for rno, score, parents in rows:
            m = 0
            for par in parents:
                if par not in index:
                    raise ScoreFileError(f"unknown variable {par!r}", rno)
                j = index[par]
                if j == i:
                    raise ScoreFileError(f"{name!r} listed as its own parent", rno)
                if (m >> j) & 1:
                    raise ScoreFileError(f"parent {par!r} repeated", rno)
                m |= 1 << j
            if m in entries:
                raise ScoreFileError(f"duplicate parent set for {name!r}", rno)
            entries[m] = score
        tables.append(LocalScoreTable(i, entries))
    return ScoreProvider(names, tables)


def write_score_file(provider: ScoreProvider, path) -> None:
    """Write every admissible finite entry, parent sets in (size, lex) order."""
    out = [str(provider.p)]
    for i, name in enumerate(provider.names):
        if any(ch.isspace() for ch in name) or not name:
            raise ValueError(f"variable name {name!r} cannot be written to a score file")
        sets = provider.parent_sets(i)
        out.append(f"{name} {len(sets)}")
        for parents, score in sets:
            toks = [repr(float(score)), str(len(parents))] + [provider.names[j] for j in parents]
            out.append(" ".join(toks))
    Path(path).write_text("\n".join(out) + "\n")
