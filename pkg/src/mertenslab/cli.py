"""Command-line front end.

Exit codes: 0 success, 1 bound violated up to the end of the range,
2 tool error (I/O, format, usage), 3 tolerance budget unmeetable.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .chebyshev import b_of, gap_endpoints, phi
from .numeric import BudgetError, DomainError
from .primes import (CacheFormatError, CapacityError, InsufficientCacheError,
                     build_cache, load_cache, read_header, save_cache)
from .rh_criteria import (CHECK_IDS, TAIL_MODEL_REL, CheckParams, decompose,
                          decompose_arrays, e_tail_model, run_check)

log = logging.getLogger("mertenslab")

CACHE_DIR_ENV = "MERTENSLAB_CACHE_DIR"
EXIT_OK, EXIT_VIOLATION, EXIT_ERROR, EXIT_BUDGET = 0, 1, 2, 3
DEFAULT_MAX_ROWS = 1_000_000

SCAN_FIELDS = ("x", "theta", "delta", "phi", "b", "S", "P", "R", "Q", "A",
               "H", "H_err", "T", "T_err", "D", "E", "E_err", "F",
               "residual", "residual_err")


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    cache_path: str | None = None
    limit: int | None = None
    x_lo: float = 10.0
    x_hi: float = 1e6
    grid_mode: str = "gap_endpoints"
    grid_n: int | None = None
    t_max: float | None = None
    eps: float = 0.25
    delta0: float = 0.1
    tolerance: float | None = None
    workers: int = 1
    output_path: str | None = None
    format: str = "csv"
    max_rows: int = DEFAULT_MAX_ROWS

    def validate(self):
        if self.cache_path is None and self.limit is None:
            raise UsageError("one of --cache or --limit is required")
        if not self.x_lo <= self.x_hi:
            raise UsageError(f"empty range {self.x_lo}:{self.x_hi}")
        if self.grid_mode not in ("gap_endpoints", "full", "log_spaced"):
            raise UsageError(f"unknown grid mode {self.grid_mode!r}")
        if self.grid_mode == "log_spaced" and not (self.grid_n and self.grid_n >= 1):
            raise UsageError("log_spaced needs a positive point count, e.g. log_spaced:5")
        if not 0 < self.eps < 0.5:
            raise UsageError("--eps must lie in (0, 0.5)")
        if self.delta0 <= 0:
            raise UsageError("--delta0 must be positive")
        if self.workers < 1:
            raise UsageError("--workers must be >= 1")
        if self.format not in ("csv", "json"):
            raise UsageError(f"unknown format {self.format!r}")
        return self


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------

def parse_range(text: str):
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"range must look like lo:hi, got {text!r}")


def parse_grid(text: str):
    t = text.strip().replace("(", ":").rstrip(")")
    if t in ("gap_endpoints", "full"):
        return t, None
    if t.startswith("log_spaced:"):
        try:
            return "log_spaced", int(t.split(":", 1)[1])
        except ValueError:
            pass
    raise argparse.ArgumentTypeError(
        f"grid must be gap_endpoints, full or log_spaced:N, got {text!r}")


def _number(text: str) -> float:
    return float(text)


def _int_number(text: str) -> int:
    v = float(text)
    if v != int(v):
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    return int(v)


def fmt(v) -> str:
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# cache resolution
# ---------------------------------------------------------------------------

def resolve_cache(cfg: RunConfig, need: float):
    if cfg.cache_path:
        cache = load_cache(cfg.cache_path)
    else:
        cache_dir = os.environ.get(CACHE_DIR_ENV)
        path = os.path.join(cache_dir, f"primes_{cfg.limit}.nplc") if cache_dir else None
        if path and os.path.exists(path):
            cache = load_cache(path)
        else:
            cache = build_cache(cfg.limit, workers=cfg.workers)
            if path:
                os.makedirs(cache_dir, exist_ok=True)
                save_cache(cache, path)
    if need > cache.limit:
        raise InsufficientCacheError(
            f"cache limit {cache.limit} does not cover {need:g}")
    return cache


# ---------------------------------------------------------------------------
# scan
# ---------------------------------------------------------------------------

def thin_log_uniform(points: np.ndarray, max_rows: int) -> np.ndarray:
    """Keep at most ``max_rows`` points, spread evenly in log x."""
    if points.size <= max_rows:
        return points
    targets = np.geomspace(points[0], points[-1], max_rows)
    idx = np.unique(np.clip(np.searchsorted(points, targets), 0, points.size - 1))
    return points[idx]


def scan_grid(cfg: RunConfig, cache) -> np.ndarray:
    lo = max(cfg.x_lo, 3.0)
    if cfg.grid_mode == "log_spaced":
        if cfg.grid_n == 1:
            return np.array([lo])
        g = np.geomspace(lo, cfg.x_hi, cfg.grid_n)
        g[0], g[-1] = lo, cfg.x_hi
        return g
    pts = gap_endpoints(lo, cfg.x_hi, cache)
    if cfg.grid_mode == "gap_endpoints":
        pts = thin_log_uniform(pts, cfg.max_rows)
    return pts


def scan_columns(grid: np.ndarray, cache, t_max: float, workers: int = 1) -> dict:
    def one(chunk):
        cols = decompose_arrays(chunk, t_max, cache)
        cols["phi"] = np.asarray(phi(chunk, cache))
        cols["b"] = np.asarray(b_of(chunk, cache))
        cols["delta"] = cols["theta"] - chunk
        return cols

    if workers > 1 and grid.size > 1:
        parts_in = np.array_split(grid, workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, parts_in))
        return {k: np.concatenate([p[k] for p in parts]) for k in SCAN_FIELDS}
    cols = one(grid)
    return {k: cols[k] for k in SCAN_FIELDS}


def check_budget(tol, cache, t_max):
    """Raise BudgetError when T or E bounds cannot get below ``tol``."""
    if tol is None:
        return
    t_bound = 1.0 / (2.0 * cache.limit)
    e_bound = TAIL_MODEL_REL * abs(e_tail_model(t_max))
    if t_bound > tol:
        raise BudgetError(f"T bound {t_bound:.3g} > tol {tol:.3g}; "
                          f"needs a cache limit >= {math.ceil(1 / (2 * tol))}",
                          achieved=t_bound)
    if e_bound > tol:
        raise BudgetError(f"E tail bound {e_bound:.3g} > tol {tol:.3g} at t_max={t_max:g}",
                          achieved=e_bound)


def write_rows(cols: dict, path, fmt_name: str):
    n = cols["x"].shape[0]
    out = open(path, "w", newline="") if path else sys.stdout
    try:
        if fmt_name == "csv":
            w = csv.writer(out)
            w.writerow(SCAN_FIELDS)
            columns = [cols[k] for k in SCAN_FIELDS]
            for i in range(n):
                w.writerow([fmt(c[i]) for c in columns])
        else:
            for i in range(n):
                row = {k: float(cols[k][i]) for k in SCAN_FIELDS}
                out.write(json.dumps(row) + "\n")
    finally:
        if path:
            out.close()


def cmd_scan(cfg: RunConfig) -> int:
    cfg.validate()
    cache = resolve_cache(cfg, cfg.x_hi)
    t_max = float(cfg.t_max if cfg.t_max is not None else cache.limit)
    cache.require(t_max, "t_max")
    if cfg.x_hi > t_max:
        raise UsageError(f"range end {cfg.x_hi:g} exceeds t_max {t_max:g}")
    check_budget(cfg.tolerance, cache, t_max)
    grid = scan_grid(cfg, cache)
    cols = scan_columns(grid, cache, t_max, cfg.workers)
    if cfg.tolerance is not None:
        worst = float(np.max(cols["residual_err"])) if grid.size else 0.0
        if worst > cfg.tolerance:
            raise BudgetError(f"residual bound {worst:.3g} exceeds tol {cfg.tolerance:.3g}",
                              achieved=worst)
    write_rows(cols, cfg.output_path, cfg.format)
    log.info("scan: %d rows", grid.size)
    return EXIT_OK


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

def write_report(report, path, fmt_name: str):
    d = report.to_dict()
    out = open(path, "w", newline="") if path else sys.stdout
    try:
        if fmt_name == "json":
            out.write(json.dumps(d, indent=2) + "\n")
        else:
            w = csv.writer(out)
            w.writerow(("check_id", "lo", "hi", "points_evaluated", "violation_count",
                        "min", "argmin", "max", "argmax", "onset"))
            e = d["extrema"]
            w.writerow((d["check_id"], fmt(d["range"][0]), fmt(d["range"][1]),
                        d["points_evaluated"], d["violation_count"],
                        fmt(e["min"]), fmt(e["argmin"]), fmt(e["max"]), fmt(e["argmax"]),
                        "" if d["onset"] is None else fmt(d["onset"])))
            w.writerow(())
            w.writerow(("at", "lhs", "rhs", "condition"))
            for v in d["violations"]:
                w.writerow((fmt(v["at"]), fmt(v["lhs"]), fmt(v["rhs"]), v["condition"]))
    finally:
        if path:
            out.close()


def cmd_check(check_id: str, cfg: RunConfig) -> int:
    cfg.validate()
    if check_id not in CHECK_IDS:
        raise UsageError(f"unknown check {check_id!r}; choose from {', '.join(CHECK_IDS)}")
    k_check = check_id in ("uk_35", "vk_35")
    cache = resolve_cache(cfg, 0 if k_check else cfg.x_hi)
    params = CheckParams(eps=cfg.eps, delta0=cfg.delta0, t_max=cfg.t_max,
                         workers=cfg.workers)
    report = run_check(check_id, (cfg.x_lo, cfg.x_hi), cache, params)
    write_report(report, cfg.output_path, cfg.format)
    print(f"{check_id}: {report.points_evaluated} points, "
          f"{report.violation_count} violations, onset={report.onset}", file=sys.stderr)
    return EXIT_VIOLATION if report.persistent else EXIT_OK


# ---------------------------------------------------------------------------
# cache
# ---------------------------------------------------------------------------

def cmd_cache(action: str, limit=None, path=None, workers=1, segment=None) -> int:
    if action == "build":
        if limit is None or path is None:
            raise UsageError("cache build needs --limit and --out")
        kw = {"segment_size": segment} if segment else {}
        cache = build_cache(limit, workers=workers, **kw)
        save_cache(cache, path)
        print(f"limit {cache.limit}\ncount {cache.count}")
        return EXIT_OK
    if action == "info":
        lim, count = read_header(path)
        print(f"path {path}\nlimit {lim}\ncount {count}")
        return EXIT_OK
    raise UsageError(f"unknown cache action {action!r}")


def cmd_decompose(cfg: RunConfig, xs) -> int:
    cfg.validate()
    cache = resolve_cache(cfg, max(xs))
    t_max = float(cfg.t_max if cfg.t_max is not None else cache.limit)
    check_budget(cfg.tolerance, cache, t_max)
    out = open(cfg.output_path, "w") if cfg.output_path else sys.stdout
    try:
        for x in xs:
            out.write(json.dumps(decompose(x, t_max, cache).to_dict()) + "\n")
    finally:
        if cfg.output_path:
            out.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parser
# ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, default_range: str):
    p.add_argument("--cache", help="prime cache file (.nplc)")
    p.add_argument("--limit", type=_int_number,
                   help=f"sieve this limit in memory when --cache is absent "
                        f"(reused from ${CACHE_DIR_ENV} when set)")
    p.add_argument("--range", type=parse_range, default=parse_range(default_range),
                   metavar="LO:HI", help=f"x range (k range for uk_35/vk_35); "
                                         f"default {default_range}")
    p.add_argument("--tmax", type=_number, help="upper quadrature limit for E "
                                                "(default: cache limit)")
    p.add_argument("--eps", type=_number, default=0.25, help="epsilon in the criteria "
                                                             "(default 0.25)")
    p.add_argument("--delta0", type=_number, default=0.1,
                   help="bound on |b| for the H window -2 +/- 5 delta0 (default 0.1)")
    p.add_argument("--tol", type=_number, help="largest acceptable error bound; "
                                               "exit 3 when unmeetable")
    p.add_argument("--workers", type=int, default=1, help="worker threads (default 1)")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mertenslab",
        description="Mertens remainders, Chebyshev primitives and RH bound checks.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("cache", help="build or inspect a prime cache")
    csub = pc.add_subparsers(dest="action", required=True)
    pb = csub.add_parser("build", help="sieve primes and save them")
    pb.add_argument("--limit", type=_int_number, required=True)
    pb.add_argument("--out", required=True)
    pb.add_argument("--segment", type=_int_number, help="odd values per segment")
    pb.add_argument("--workers", type=int, default=1)
    pi = csub.add_parser("info", help="print the header of a cache file")
    pi.add_argument("path")

    ps = sub.add_parser("scan", help="tabulate every quantity over a grid")
    _common(ps, "10:1e6")
    ps.add_argument("--grid", type=parse_grid, default=("gap_endpoints", None),
                    help="gap_endpoints (thinned to --max-rows), full, or log_spaced:N")
    ps.add_argument("--max-rows", type=_int_number, default=DEFAULT_MAX_ROWS)

    pk = sub.add_parser("check", help="run one bound check over a range")
    pk.add_argument("check_id", help=", ".join(CHECK_IDS))
    _common(pk, "1e3:1e6")

    pd = sub.add_parser("decompose", help="H = D + E + F at given points (JSON lines)")
    pd.add_argument("--x", type=_number, nargs="+", required=True)
    _common(pd, "10:1e6")
    return parser


def config_from_args(args) -> RunConfig:
    grid_mode, grid_n = getattr(args, "grid", ("gap_endpoints", None))
    return RunConfig(
        cache_path=args.cache, limit=args.limit, x_lo=args.range[0], x_hi=args.range[1],
        grid_mode=grid_mode, grid_n=grid_n, t_max=args.tmax, eps=args.eps,
        delta0=args.delta0, tolerance=args.tol, workers=args.workers,
        output_path=args.out, format=args.format,
        max_rows=getattr(args, "max_rows", DEFAULT_MAX_ROWS))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    out_path = getattr(args, "out", None)
    try:
        if args.command == "cache":
            if args.action == "build":
                return cmd_cache("build", args.limit, args.out, args.workers, args.segment)
            return cmd_cache("info", path=args.path)
        cfg = config_from_args(args)
        if args.command == "scan":
            return cmd_scan(cfg)
        if args.command == "check":
            return cmd_check(args.check_id, cfg)
        return cmd_decompose(cfg, args.x)
    except BudgetError as exc:
        if out_path and args.command != "cache" and os.path.exists(out_path):
            os.remove(out_path)
        print(f"mertenslab: budget: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mertenslab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, CacheFormatError, CapacityError, InsufficientCacheError,
            DomainError, ValueError) as exc:
        print(f"mertenslab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
