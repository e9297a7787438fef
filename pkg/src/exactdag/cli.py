"""Command-line interface: simulate, score, learn, bench."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor

import yaml

from .bounds import matching_certificate
from .engine import ALL_RULES, InfeasibleError, SearchConfig, run_search
from .scores import (
    DegenerateDataError,
    ScoreFileError,
    SearchSpace,
    compute_bge_capped,
    compute_bge_tables,
    load_data_csv,
    load_score_file,
    load_search_space,
    write_score_file,
)
from .simulate import simulate, write_data_csv, write_edges_csv

log = logging.getLogger("exactdag")

EXIT_OK, EXIT_IO, EXIT_INFEASIBLE = 0, 1, 2
# deduplication (pruning 1, of which 7 is the right-order form) is reported as prune_1
RULE_COLUMNS = [f"prune_{r}" for r in range(1, 13) if r != 7]
BENCH_COLUMNS = ["p", "density", "seed", "score", "sigma_n", "stage_counts", *RULE_COLUMNS, "wall_time",
                 "certified"]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="exactdag", description="Exact Bayesian network structure learning.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="random DAG and linear-Gaussian data")
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--density", type=float, required=True, help="expected neighbourhood size")
    s.add_argument("--n", type=int, required=True, help="number of samples")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--signed", action="store_true", help="flip coefficient signs at random")
    s.add_argument("--random-noise", action="store_true", help="noise variances uniform in [0.5, 2]")
    s.add_argument("--out-data", required=True)
    s.add_argument("--out-truth", required=True)

    s = sub.add_parser("score", help="BGe score tables from data")
    s.add_argument("--data", required=True)
    _space_args(s)
    s.add_argument("--out", required=True)

    s = sub.add_parser("learn", help="find an optimal DAG")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--scores", help="score file")
    src.add_argument("--data", help="data CSV (scored with BGe)")
    _space_args(s)
    s.add_argument("--out-dag", help="edge list CSV (child,parent)")
    s.add_argument("--out-dot", help="DOT graph")
    s.add_argument("--out-stats", help="run statistics (JSON)")
    _search_args(s)

    s = sub.add_parser("bench", help="run a grid of simulations")
    s.add_argument("--grid-file", required=True, help="YAML grid")
    s.add_argument("--out-csv", required=True)
    s.add_argument("--append", action="store_true", help="append rows to an existing CSV")
    _search_args(s)
    return ap


def _space_args(s):
    s.add_argument("--space", help="search-space YAML (preselected sets and plus1 flags)")
    s.add_argument("--max-parents", type=int, default=None,
                   help="without --space: every parent set up to this size (default 2)")
    s.add_argument("--am", type=float, default=0.1, help="BGe alpha_mu (default 0.1)")
    s.add_argument("--aw", type=float, default=None, help="BGe alpha_w (default p + alpha_mu + 1)")


def _search_args(s):
    s.add_argument("--no-dnc", action="store_true", help="search all nodes at once")
    s.add_argument("--no-bounds", action="store_true", help="disable prunings 11-12 and incumbent updates")
    s.add_argument("--no-prune", action="store_true", help="disable every pruning except deduplication")
    s.add_argument("--disable-rule", type=int, action="append", default=[], metavar="R",
                   help="disable pruning rule R (repeatable)")
    s.add_argument("--epsilon", type=float, default=0.0, help="slack for strict-inequality prunings")
    s.add_argument("--direction", choices=["front", "back"], default="front")
    s.add_argument("--bound-every", type=int, default=1, help="evaluate bounds every k-th stage")
    s.add_argument("--workers", type=int, default=1)


def config_from_args(args) -> SearchConfig:
    rules = set(ALL_RULES)
    updates = {1, 2}
    if args.no_prune:
        rules = {1}
    for r in args.disable_rule:
        if r not in ALL_RULES:
            raise ValueError(f"unknown pruning rule {r}")
        rules.discard(r)
    if args.no_bounds or args.no_prune:
        rules -= {11, 12}
        updates = set()
    return SearchConfig(rules=frozenset(rules), updates=frozenset(updates), dnc=not args.no_dnc,
                        direction=args.direction, epsilon=args.epsilon, bound_every=args.bound_every,
                        workers=args.workers)


def provider_from_data(path, space_path, max_parents, am, aw):
    data = load_data_csv(path)
    if space_path:
        space = load_search_space(space_path, data.names)
        return compute_bge_tables(data, space, alpha_mu=am, alpha_w=aw)
    return compute_bge_capped(data, 2 if max_parents is None else max_parents, alpha_mu=am, alpha_w=aw)


def cmd_simulate(args) -> int:
    data, edges = simulate(args.p, args.density, args.n, args.seed, signed=args.signed,
                           random_noise=args.random_noise)
    write_data_csv(data, args.out_data)
    write_edges_csv(edges, data.names, args.out_truth)
    log.info("simulated %d edges", len(edges))
    return EXIT_OK


def cmd_score(args) -> int:
    provider = provider_from_data(args.data, args.space, args.max_parents, args.am, args.aw)
    write_score_file(provider, args.out)
    return EXIT_OK


def dot_text(result) -> str:
    names = result.names
    lines = ["digraph G {"]
    for v in range(len(names)):
        lines.append(f'  "{names[v]}";')
    for c, q in result.dag.edges():
        lines.append(f'  "{names[q]}" -> "{names[c]}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def cmd_learn(args) -> int:
    config = config_from_args(args)
    if args.scores:
        provider = load_score_file(args.scores)
    else:
        provider = provider_from_data(args.data, args.space, args.max_parents, args.am, args.aw)
    result = run_search(provider, config)
    cert = matching_certificate(provider)
    record = result.to_dict()
    record["certified"] = bool(record["certified"] or cert is not None)
    record["node_index"] = {name: i for i, name in enumerate(provider.names)}
    if args.out_dag:
        with open(args.out_dag, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["child", "parent"])
            w.writerows(record["edges"])
    if args.out_dot:
        with open(args.out_dot, "w") as fh:
            fh.write(dot_text(result))
    if args.out_stats:
        with open(args.out_stats, "w") as fh:
            json.dump(record, fh, indent=2)
            fh.write("\n")
    print(f"score {result.score_float!r}")
    print("order " + " ".join(record["order"]))
    print(f"sigma_n {result.stats.sigma_n}")
    return EXIT_OK


def bench_grid(doc) -> list[dict]:
    """Expand a grid document into one job per (p, density, seed)."""
    doc = doc or {}
    ps = doc.get("p", [])
    ds = doc.get("density", [])
    seeds = doc.get("seeds")
    if seeds is None:
        seeds = list(range(int(doc.get("n_seeds", 0))))
    ps = ps if isinstance(ps, list) else [ps]
    ds = ds if isinstance(ds, list) else [ds]
    common = {
        "samples": int(doc.get("samples", 300)),
        "space": doc.get("space", "skeleton"),
        "max_parents": int(doc.get("max_parents", 2)),
        "am": float(doc.get("am", 0.1)),
        "aw": doc.get("aw"),
    }
    if common["space"] not in ("skeleton", "capped"):
        raise ValueError("grid 'space' must be 'skeleton' or 'capped'")
    return [dict(common, p=int(p), density=float(d), seed=int(s)) for p in ps for d in ds for s in seeds]


def bench_run(job, config: SearchConfig) -> dict:
    data, edges = simulate(job["p"], job["density"], job["samples"], job["seed"])
    if job["space"] == "skeleton":
        provider = compute_bge_tables(data, SearchSpace.from_skeleton(job["p"], edges), job["am"], job["aw"])
    else:
        provider = compute_bge_capped(data, job["max_parents"], job["am"], job["aw"])
    result = run_search(provider, config)
    cert = matching_certificate(provider) is not None
    row = {
        "p": job["p"],
        "density": job["density"],
        "seed": job["seed"],
        "score": repr(result.score_float),
        "sigma_n": result.stats.sigma_n,
        "stage_counts": ";".join(str(c) for c in result.stats.stage_counts),
        "wall_time": f"{result.stats.wall_time:.6f}",
        "certified": int(cert or result.stats.certified),
    }
    for col in RULE_COLUMNS:
        row[col] = result.stats.prunes.get(int(col.split("_")[1]), 0)
    return row


def _bench_task(item):
    job, config = item
    return bench_run(job, config)


def run_bench(grid: list[dict], config: SearchConfig) -> list[dict]:
    inner = SearchConfig(rules=config.rules, updates=config.updates, dnc=config.dnc, direction=config.direction,
                         epsilon=config.epsilon, bound_every=config.bound_every, workers=1)
    items = [(job, inner) for job in grid]
    if config.workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(_bench_task, items, chunksize=4))
    else:
        rows = [_bench_task(it) for it in items]
    rows.sort(key=lambda r: (r["p"], r["density"], r["seed"]))
    return rows


def cmd_bench(args) -> int:
    with open(args.grid_file) as fh:
        grid = bench_grid(yaml.safe_load(fh))
    rows = run_bench(grid, config_from_args(args))
    mode = "a" if args.append else "w"
    with open(args.out_csv, mode, newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS, lineterminator="\n")
        if not args.append or fh.tell() == 0:
            w.writeheader()
        w.writerows(rows)
    log.info("wrote %d rows", len(rows))
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "score": cmd_score, "learn": cmd_learn, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    warnings.simplefilter("default")
    try:
        return COMMANDS[args.command](args)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OSError, ScoreFileError, DegenerateDataError, ValueError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
