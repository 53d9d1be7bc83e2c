"""Mertens sums and the classical / modified remainders R(x), Q(x)."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .chebyshev import count_sign_changes, gap_endpoints, prime_table
from .numeric import GAMMA, DomainError, comp_cumsum, comp_suffix
from .primes import PrimeCache

MIN_X = 3.0
_SERIES_FROM = 30


@dataclass(frozen=True)
class MertensPoint:
    x: float
    S: float
    P: float
    R: float
    Q: float
    A: float
    theta: float


@dataclass(frozen=True)
class MertensTable:
    S: np.ndarray        # sum_{p <= p_j} log(p/(p-1))
    P: np.ndarray        # sum_{p <= p_j} 1/p
    excess: np.ndarray   # log(p/(p-1)) - 1/p per prime
    excess_suffix: np.ndarray  # sum_{i >= j} excess_i


def log_ratio_terms(p: np.ndarray) -> np.ndarray:
    """log(p/(p-1)) evaluated as -log1p(-1/p)."""
    return -np.log1p(-1.0 / p)


def excess_terms(p: np.ndarray) -> np.ndarray:
    """log(p/(p-1)) - 1/p = sum_{k>=2} 1/(k p^k) without cancellation."""
    u = 1.0 / p
    out = -np.log1p(-u) - u
    big = p >= _SERIES_FROM
    ub = u[big]
    # u < 1/29: terms through u**15 leave a relative error below 1e-19
    acc = np.zeros_like(ub)
    for k in range(15, 1, -1):
        acc = (acc + 1.0 / k) * ub
    out[big] = acc * ub
    return out


def mertens_table(cache: PrimeCache) -> MertensTable:
    tab = cache._derived.get("mertens_table")
    if tab is None:
        p = prime_table(cache).p
        excess = excess_terms(p)
        tab = MertensTable(
            S=comp_cumsum(log_ratio_terms(p)),
            P=comp_cumsum(1.0 / p),
            excess=excess,
            excess_suffix=comp_suffix(excess),
        )
        cache._derived["mertens_table"] = tab
    return tab


def _check_x(x, cache):
    if x < MIN_X:
        raise DomainError(f"x must be >= 3 (log log theta(x) undefined below), got {x}")
    cache.require(x)


def mertens_point(x: float, cache: PrimeCache) -> MertensPoint:
    """All Mertens quantities at x, summed directly over the primes <= x."""
    _check_x(x, cache)
    ps = cache.primes[: np.searchsorted(cache.primes, x, side="right")].astype(np.float64)
    S = math.fsum(log_ratio_terms(ps))
    P = math.fsum(1.0 / ps)
    th = math.fsum(np.log(ps))
    return _assemble(x, S, P, th)


def _assemble(x, S, P, th):
    lx = math.log(x)
    R = S - math.log(lx) - GAMMA
    Q = S - math.log(math.log(th)) - GAMMA
    return MertensPoint(x, S, P, R, Q, Q * math.sqrt(x) * lx, th)


def mertens_arrays(grid, cache: PrimeCache) -> dict:
    """Vectorised prefix-sum evaluation; returns arrays keyed by field name."""
    x = np.asarray(grid, dtype=np.float64)
    if x.size:
        if np.min(x) < MIN_X:
            raise DomainError(f"grid must lie in [3, limit], min is {np.min(x)}")
        cache.require(float(np.max(x)))
    ptab = prime_table(cache)
    mtab = mertens_table(cache)
    j = np.searchsorted(ptab.p, x, side="right") - 1
    S, P, th = mtab.S[j], mtab.P[j], ptab.theta[j]
    lx = np.log(x)
    R = S - np.log(lx) - GAMMA
    Q = S - np.log(np.log(th)) - GAMMA
    return {"x": x, "S": S, "P": P, "R": R, "Q": Q,
            "A": Q * np.sqrt(x) * lx, "theta": th}


def scan_mertens(grid, cache: PrimeCache, workers: int = 1) -> list[MertensPoint]:
    """Mertens points along an ascending grid from the cache's prefix sums."""
    x = np.asarray(grid, dtype=np.float64)
    if np.any(np.diff(x) < 0):
        raise ValueError("grid must be ascending")
    if workers > 1 and x.size > 1:
        chunks = np.array_split(x, workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: mertens_arrays(c, cache), chunks))
        cols = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
    else:
        cols = mertens_arrays(x, cache)
    return [MertensPoint(*vals) for vals in zip(
        *(cols[k].tolist() for k in ("x", "S", "P", "R", "Q", "A", "theta")))]


@dataclass(frozen=True)
class BEpsStats:
    eps: float
    sup: float
    argsup: float
    inf: float
    arginf: float


def b_eps_stats(eps: float, grid, cache: PrimeCache) -> BEpsStats:
    """Running extrema of Q(x) x^{1/2 - eps} over the grid."""
    if not 0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 0.5), got {eps}")
    x = np.asarray(grid, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty grid")
    if np.any(np.diff(x) < 0):
        raise ValueError("grid must be ascending")
    stat = mertens_arrays(x, cache)["Q"] * x ** (0.5 - eps)
    hi, lo = int(np.argmax(stat)), int(np.argmin(stat))
    return BEpsStats(eps, float(stat[hi]), float(x[hi]), float(stat[lo]), float(x[lo]))


def r_sign_changes(lo: float, hi: float, cache: PrimeCache) -> int:
    """Zero crossings of R(x) on [lo, hi]; R falls between primes, jumps at them."""
    if lo >= hi:
        return 0
    pts = gap_endpoints(max(lo, MIN_X), hi, cache)
    return count_sign_changes(mertens_arrays(pts, cache)["R"])
