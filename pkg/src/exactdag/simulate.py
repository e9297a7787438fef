"""Random DAGs and linear-Gaussian data."""

from __future__ import annotations

import csv

import numpy as np

from .scores import DataMatrix


def default_names(p: int) -> tuple[str, ...]:
    return tuple(f"X{i + 1}" for i in range(p))


def random_dag(p: int, density: float, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Erdos-Renyi DAG with expected neighbourhood size ``density``.

    Nodes are put in a random causal order and each forward pair gets an
    edge with probability ``min(1, density / (p - 1))``.  Returns
    ``(child, parent)`` pairs sorted by child then parent.
    """
    if p < 1:
        raise ValueError("p must be positive")
    if density < 0:
        raise ValueError("density must be non-negative")
    prob = min(1.0, density / (p - 1)) if p > 1 else 0.0
    perm = rng.permutation(p)
    draws = rng.random((p, p))
    edges = []
    for a in range(p):
        for b in range(a + 1, p):
            if draws[a, b] < prob:
                edges.append((int(perm[b]), int(perm[a])))
    return sorted(edges)


def sample_sem(p: int, edges, m: int, rng: np.random.Generator, low: float = 0.25, high: float = 1.0,
               signed: bool = False, random_noise: bool = False) -> np.ndarray:
    """Draw ``m`` samples of a linear SEM on the DAG ``edges`` (child, parent)."""
    if m < 1:
        raise ValueError("need at least one sample")
    parents = [[] for _ in range(p)]
    for c, q in edges:
        parents[c].append(q)
    coefs = {}
    for c, q in sorted(edges):
        w = rng.uniform(low, high)
        if signed and rng.random() < 0.5:
            w = -w
        coefs[(c, q)] = w
    sd = np.sqrt(rng.uniform(0.5, 2.0, size=p)) if random_noise else np.ones(p)
    noise = rng.standard_normal((m, p)) * sd
    X = np.zeros((m, p))
    done = [False] * p

    def fill(v):
        if done[v]:
            return
        for q in parents[v]:
            fill(q)
        X[:, v] = noise[:, v] + sum((coefs[(v, q)] * X[:, q] for q in parents[v]), np.zeros(m))
        done[v] = True

    for v in range(p):
        fill(v)
    return X


def simulate(p: int, density: float, m: int, seed: int, signed: bool = False,
             random_noise: bool = False) -> tuple[DataMatrix, list[tuple[int, int]]]:
    """Random DAG plus data drawn from it; deterministic in ``seed``."""
    if p < 2:
        raise ValueError("p must be at least 2")
    rng = np.random.default_rng(seed)
    edges = random_dag(p, density, rng)
    X = sample_sem(p, edges, m, rng, signed=signed, random_noise=random_noise)
    return DataMatrix(X, default_names(p)), edges


def simulate_matching(p: int, m: int, seed: int, low: float = 0.9, high: float = 1.0) -> tuple[DataMatrix, list]:
    """Data from a perfect matching (odd ``p`` leaves the last node single)."""
    rng = np.random.default_rng(seed)
    edges = [(i + 1, i) for i in range(0, p - 1, 2)]
    X = sample_sem(p, edges, m, rng, low=low, high=high)
    return DataMatrix(X, default_names(p)), edges


def write_data_csv(data: DataMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.names)
        for row in data.values:
            w.writerow([repr(float(x)) for x in row])


def write_edges_csv(edges, names, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["child", "parent"])
        for c, q in edges:
            w.writerow([names[c], names[q]])
