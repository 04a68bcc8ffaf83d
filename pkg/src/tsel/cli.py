"""Command-line entry point.

Subcommands: select, project, w1, quantile, compare, and validate
{decay,mcdiarmid}. Results are JSON; feature matrices travel as TSEL
binary files. Exit codes: 0 success, 1 invalid configuration, 2 solver
non-convergence, 3 I/O or file-format failure.

Every run with fixed seeds is reproducible byte for byte: the
algorithms are single-threaded deterministic NumPy, BLAS pools are
pinned to one thread for bit-stable reductions, and TSEL_THREADS (when
set) is validated and applied as an upper bound on worker parallelism.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, io, simulate
from .features import ProjectionSpec, project_features
from .selection import METHODS, KnnParams, UotParams, select_from_features
from .similarity import (
    CheckpointFeatureStore,
    load_checkpoint_store,
    pairwise_cosine,
    pairwise_l2,
    weighted_checkpoint_similarity,
)
from .transport import ConvergenceError, exact_w1, sinkhorn

_blas_limiter = None


def _configure_threads() -> int:
    """Pin BLAS pools to one thread and validate the TSEL_THREADS cap.

    One-thread BLAS keeps every reduction order fixed, so outputs cannot
    depend on the machine's core count or on the requested cap. The cap
    still bounds any worker pools (all current algorithms are
    single-threaded, so it is an upper bound that is never reached).
    """
    global _blas_limiter
    raw = os.environ.get("TSEL_THREADS")
    cap = 1
    if raw is not None:
        try:
            cap = int(raw)
        except ValueError:
            raise ValueError(f"TSEL_THREADS must be a positive integer, got {raw!r}") from None
        if cap < 1:
            raise ValueError(f"TSEL_THREADS must be a positive integer, got {raw!r}")
    try:
        from threadpoolctl import threadpool_limits

        _blas_limiter = threadpool_limits(limits=1)
    except ImportError:
        pass
    return cap


class UsageError(Exception):
    """Command-line arguments could not be parsed."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; 2 is reserved for solver
    # non-convergence here, so argument problems become exit 1 instead.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration of one selection run."""

    method: str
    query_path: Path
    pool_path: Path
    budget: int
    out_path: Path
    metric: str = "cosine"
    half_normalize: bool | None = None
    manifest: bool = False
    seed: int = 0
    knn: KnnParams = field(default_factory=KnnParams)
    uot: UotParams = field(default_factory=UotParams)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.metric not in ("cosine", "l2"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")


def ingest(path: str | Path, manifest: bool = False):
    """Load a TSEL feature matrix, or a checkpoint store from a manifest."""
    if manifest:
        return load_checkpoint_store(path)
    return io.load_features(path)


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _similarity_for(queries, pool, metric: str) -> np.ndarray:
    stores = isinstance(queries, CheckpointFeatureStore)
    if metric == "cosine":
        return weighted_checkpoint_similarity(queries, pool) if stores else pairwise_cosine(queries, pool)
    from .similarity import concat_scaled_features

    if stores:
        queries = concat_scaled_features(queries)
        pool = concat_scaled_features(pool)
    return -pairwise_l2(queries, pool)


def _cmd_select(args) -> int:
    config = RunConfig(
        method=args.method,
        query_path=Path(args.query),
        pool_path=Path(args.pool),
        budget=args.budget,
        out_path=Path(args.out),
        metric=args.metric,
        half_normalize=True if args.half_normalize else None,
        manifest=args.manifest,
        seed=args.seed,
        knn=KnnParams(
            k=args.k,
            prefetch=args.prefetch,
            kde_neighbors=args.kde_neighbors,
            sigma=args.sigma,
            k_scale=args.k_scale,
            mass_cutoff=args.alpha,
        ),
        uot=UotParams(epsilon=args.epsilon, tau2=args.tau2, tol=args.tol, max_iter=args.max_iter),
    )
    started = time.perf_counter()
    queries = ingest(config.query_path, config.manifest)
    pool = ingest(config.pool_path, config.manifest)
    result = select_from_features(
        config.method,
        queries,
        pool,
        config.budget,
        metric=config.metric,
        half_normalize=config.half_normalize,
        knn_params=config.knn,
        uot_params=config.uot,
    )
    _write_json(config.out_path, result.to_dict())
    wall = time.perf_counter() - started
    print(f"{result.method} B={result.budget} wall={wall:.3f}s top5={list(result.indices[:5])}")
    return 0


def _cmd_project(args) -> int:
    started = time.perf_counter()
    matrix = io.load_features(args.input)
    spec = ProjectionSpec(seed=args.seed, in_dim=matrix.shape[1], out_dim=args.out_dim)
    projected = project_features(matrix, spec)
    io.write_features(args.out, projected)
    wall = time.perf_counter() - started
    print(f"project {matrix.shape[0]}x{matrix.shape[1]} -> {args.out_dim} wall={wall:.3f}s seed={args.seed}")
    return 0


def _cmd_w1(args) -> int:
    x = io.load_features(args.x)
    y = io.load_features(args.y)
    if args.epsilon is None:
        value = exact_w1(x, y)
        method = "exact"
    else:
        costs = pairwise_l2(x, y)
        plan = sinkhorn(costs, epsilon=args.epsilon, tol=args.tol, max_iter=args.max_iter)
        if not plan.converged:
            raise ConvergenceError(
                f"entropic solve did not converge in {plan.iterations} iterations "
                f"(residuals {plan.marginal_residuals[0]:.3e}, {plan.marginal_residuals[1]:.3e})",
                plan.iterations,
                max(plan.marginal_residuals),
            )
        value = plan.transport_cost(costs)
        method = "entropic"
    print(json.dumps({"w1": value, "method": method}))
    return 0


def _cmd_quantile(args) -> int:
    started = time.perf_counter()
    queries = ingest(args.query, args.manifest)
    pool = ingest(args.pool, args.manifest)
    sims = _similarity_for(queries, pool, args.metric)
    assignment = analysis.stratify_quantiles(sims, args.n)
    payload = {
        "metric": args.metric,
        "n_quantiles": assignment.n_quantiles,
        "quantiles": [list(b) for b in assignment.blocks],
        "take": args.take,
        "selected": [list(b) for b in assignment.take(args.take)],
    }
    if args.sub is not None:
        finer = analysis.sub_stratify(assignment, 1, args.sub)
        payload["sub"] = {
            "which": 1,
            "n_quantiles": finer.n_quantiles,
            "quantiles": [list(b) for b in finer.blocks],
            "selected": [list(b) for b in finer.take(args.take)],
        }
    _write_json(Path(args.out), payload)
    wall = time.perf_counter() - started
    print(f"quantile n={args.n} take={args.take} wall={wall:.3f}s")
    return 0


def _cmd_compare(args) -> int:
    with open(args.a, "r", encoding="utf-8") as fh:
        first = json.load(fh)
    with open(args.b, "r", encoding="utf-8") as fh:
        second = json.load(fh)
    value = analysis.jaccard(first["indices"], second["indices"])
    print(json.dumps({"jaccard": value}))
    return 0


def _pool_spec(args) -> simulate.SyntheticPoolSpec:
    return simulate.SyntheticPoolSpec(
        n=args.n,
        dim=args.d,
        diameter=args.diameter,
        distribution=args.distribution,
        seed=args.seed,
    )


def _cmd_validate_decay(args) -> int:
    started = time.perf_counter()
    budgets = [int(b) for b in args.budgets.split(",") if b.strip()]
    spec = _pool_spec(args)
    report = simulate.empirical_w1_decay(spec, budgets, args.trials)
    payload = report.to_dict()
    payload.update({"d": spec.dim, "n": spec.n, "distribution": spec.distribution, "diameter": spec.diameter})
    _write_json(Path(args.out), payload)
    wall = time.perf_counter() - started
    slope = "nan" if math.isnan(report.loglog_slope) else f"{report.loglog_slope:.4f}"
    print(f"decay d={spec.dim} n={spec.n} trials={report.trials} slope={slope} wall={wall:.3f}s")
    return 0


def _cmd_validate_mcdiarmid(args) -> int:
    started = time.perf_counter()
    spec = _pool_spec(args)
    coverage = simulate.mcdiarmid_coverage(spec, args.budget, args.trials, args.delta)
    payload = {
        "coverage": coverage,
        "delta": args.delta,
        "budget": args.budget,
        "trials": args.trials,
        "slack": simulate.concentration_slack(spec.diameter, args.budget, args.delta),
        "d": spec.dim,
        "n": spec.n,
        "distribution": spec.distribution,
        "diameter": spec.diameter,
        "seed": spec.seed,
    }
    _write_json(Path(args.out), payload)
    wall = time.perf_counter() - started
    print(f"mcdiarmid B={args.budget} delta={args.delta} coverage={coverage:.4f} wall={wall:.3f}s")
    return 0


def _add_pool_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--d", type=int, default=3, help="pool dimension (>= 3)")
    parser.add_argument("--n", type=int, default=512, help="pool size")
    parser.add_argument("--diameter", type=float, default=1.0, help="pool diameter bound")
    parser.add_argument(
        "--distribution",
        choices=simulate.DISTRIBUTIONS,
        default="uniform-cube",
        help="synthetic pool shape",
    )
    parser.add_argument("--seed", type=int, default=7, help="pool and trial seed")
    parser.add_argument("--out", required=True, help="output JSON path")


def build_parser() -> _Parser:
    parser = _Parser(prog="tsel", description="Targeted subset selection toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_select = sub.add_parser("select", help="select a budgeted subset of a candidate pool")
    p_select.add_argument("--method", required=True, choices=METHODS)
    p_select.add_argument("--query", required=True, help="query TSEL file (or manifest with --manifest)")
    p_select.add_argument("--pool", required=True, help="pool TSEL file (or manifest with --manifest)")
    p_select.add_argument("--budget", required=True, type=int)
    p_select.add_argument("--metric", choices=("cosine", "l2"), default="cosine")
    p_select.add_argument(
        "--half-normalize",
        action="store_true",
        help="map cosine costs onto [0, 1]; implied for --method uot",
    )
    p_select.add_argument(
        "--manifest",
        action="store_true",
        help="treat --query/--pool as checkpoint-store manifest JSON files",
    )
    p_select.add_argument("--k", type=int, default=None, help="KNN neighborhood size (derived when omitted)")
    p_select.add_argument("--prefetch", type=int, default=5000, help="per-query neighbor scan cap")
    p_select.add_argument("--kde-neighbors", type=int, default=1000, help="density-estimate neighborhood size")
    p_select.add_argument("--sigma", type=float, default=0.75, help="density kernel bandwidth")
    p_select.add_argument("--k-scale", type=float, default=5.0, help="derived-k multiplier")
    p_select.add_argument("--alpha", type=float, default=0.01, help="positive-mass reporting cutoff")
    p_select.add_argument("--epsilon", type=float, default=0.01, help="entropic regularization (uot)")
    p_select.add_argument("--tau2", type=float, default=1e-4, help="soft candidate-marginal strength (uot)")
    p_select.add_argument("--tol", type=float, default=1e-9, help="solver tolerance (uot)")
    p_select.add_argument("--max-iter", type=int, default=10000, help="solver iteration cap (uot)")
    p_select.add_argument("--seed", type=int, default=0, help="recorded in the run config; selection is deterministic")
    p_select.add_argument("--out", required=True, help="output JSON path")
    p_select.set_defaults(func=_cmd_select)

    p_project = sub.add_parser("project", help="sign-project features to a lower dimension")
    p_project.add_argument("--in", dest="input", required=True, help="input TSEL file")
    p_project.add_argument("--seed", required=True, type=int)
    p_project.add_argument("--out-dim", type=int, default=8192)
    p_project.add_argument("--out", required=True, help="output TSEL path")
    p_project.set_defaults(func=_cmd_project)

    p_w1 = sub.add_parser("w1", help="transport distance between two feature files")
    p_w1.add_argument("--x", required=True)
    p_w1.add_argument("--y", required=True)
    group = p_w1.add_mutually_exclusive_group()
    group.add_argument("--exact", action="store_true", help="exact solve (default)")
    group.add_argument("--epsilon", type=float, default=None, help="entropic solve with this regularization")
    p_w1.add_argument("--tol", type=float, default=1e-9)
    p_w1.add_argument("--max-iter", type=int, default=10000)
    p_w1.set_defaults(func=_cmd_w1)

    p_quant = sub.add_parser("quantile", help="stratify candidates into distance quantiles")
    p_quant.add_argument("--query", required=True)
    p_quant.add_argument("--pool", required=True)
    p_quant.add_argument("--manifest", action="store_true")
    p_quant.add_argument("--metric", choices=("cosine", "l2"), default="cosine")
    p_quant.add_argument("--n", type=int, default=10, help="number of quantiles")
    p_quant.add_argument("--sub", type=int, default=None, help="sub-stratify the closest quantile this many ways")
    p_quant.add_argument("--take", type=int, default=500, help="per-quantile take size")
    p_quant.add_argument("--out", required=True)
    p_quant.set_defaults(func=_cmd_quantile)

    p_compare = sub.add_parser("compare", help="Jaccard overlap of two selection JSONs")
    p_compare.add_argument("--a", required=True)
    p_compare.add_argument("--b", required=True)
    p_compare.set_defaults(func=_cmd_compare)

    p_validate = sub.add_parser("validate", help="Monte-Carlo checks of the sampling laws")
    v_sub = p_validate.add_subparsers(dest="check", required=True)

    p_decay = v_sub.add_parser("decay", help="sample-to-pool distance decay across budgets")
    p_decay.add_argument("--budgets", default="16,32,64,128,256", help="comma-separated budgets")
    p_decay.add_argument("--trials", type=int, default=50)
    _add_pool_args(p_decay)
    p_decay.set_defaults(func=_cmd_validate_decay)

    p_mc = v_sub.add_parser("mcdiarmid", help="coverage of the concentration bound")
    p_mc.add_argument("--budget", type=int, default=64)
    p_mc.add_argument("--trials", type=int, default=500)
    p_mc.add_argument("--delta", type=float, default=0.1)
    _add_pool_args(p_mc)
    p_mc.set_defaults(func=_cmd_validate_mcdiarmid)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        _configure_threads()
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except ConvergenceError as exc:
        print(f"tsel: solver did not converge: {exc}", file=sys.stderr)
        return 2
    except (io.FeatureFileError, OSError, json.JSONDecodeError) as exc:
        print(f"tsel: i/o error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError) as exc:
        print(f"tsel: invalid configuration: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
