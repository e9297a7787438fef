"""Exact Bayesian network structure learning by pruned order search."""

from .bounds import matching_certificate
from .dnc import dnc_search
from .engine import InfeasibleError, SearchConfig, SearchResult, extract_dag, run_search
from .oracle import brute_force_best_order
from .scores import (
    DataMatrix,
    ScoreProvider,
    SearchSpace,
    compute_bge_capped,
    compute_bge_tables,
    load_score_file,
    max_node_score,
    write_score_file,
)

__all__ = [
    "DataMatrix",
    "InfeasibleError",
    "ScoreProvider",
    "SearchConfig",
    "SearchResult",
    "SearchSpace",
    "brute_force_best_order",
    "compute_bge_capped",
    "compute_bge_tables",
    "dnc_search",
    "extract_dag",
    "load_score_file",
    "matching_certificate",
    "max_node_score",
    "run_search",
    "write_score_file",
]
