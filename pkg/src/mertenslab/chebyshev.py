"""Chebyshev functions and their exact primitives.

theta and psi are right-continuous step functions, so every primitive used
here (Phi, the psi-primitive, the Cramer integral) is piecewise polynomial
between prime (power) events. Values at the events are accumulated once per
cache with compensated prefix sums; any other x is a local polynomial
continuation from the last event at or below x.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numeric import DomainError, comp_cumsum
from .primes import PrimeCache, prime_power_arrays


@dataclass(frozen=True)
class PrimeTable:
    """Per-prime event data; index j refers to the j-th prime (0-based)."""

    p: np.ndarray        # float64 primes
    logp: np.ndarray
    theta: np.ndarray    # theta(p_j), event included
    phi: np.ndarray      # Phi(p_j)

    @property
    def delta(self):
        return self.theta - self.p


@dataclass(frozen=True)
class PowerTable:
    """Per prime-power event data for psi and its primitives."""

    e: np.ndarray        # float64 event values p**k
    loge: np.ndarray     # log p of each event
    psi: np.ndarray      # psi(e_i), event included
    psi1: np.ndarray     # int_0^{e_i} (psi(t) - t) dt
    cramer: np.ndarray   # int_0^{e_i} (psi(t) - t)**2 dt


@dataclass(frozen=True)
class ChebyshevPoint:
    x: float
    theta: float
    psi: float
    delta: float
    phi: float
    b: float


def _cube_gap(u1, u2):
    # (u2**3 - u1**3) / 3 without cancellation of large cubes
    return (u2 - u1) * (u1 * u1 + u1 * u2 + u2 * u2) / 3.0


def prime_table(cache: PrimeCache) -> PrimeTable:
    tab = cache._derived.get("prime_table")
    if tab is None:
        p = cache.primes.astype(np.float64)
        logp = np.log(p)
        theta = comp_cumsum(logp)
        gaps = np.diff(p)
        incr = (theta[:-1] - p[:-1]) * gaps - 0.5 * gaps * gaps
        phi = comp_cumsum(np.concatenate([[-2.0], incr]))
        tab = PrimeTable(p, logp, theta, phi)
        cache._derived["prime_table"] = tab
    return tab


def power_table(cache: PrimeCache) -> PowerTable:
    tab = cache._derived.get("power_table")
    if tab is None:
        values, loge, _ = prime_power_arrays(cache, cache.limit)
        e = values.astype(np.float64)
        psi = comp_cumsum(loge)
        gaps = np.diff(e)
        dev = psi[:-1] - e[:-1]
        incr1 = dev * gaps - 0.5 * gaps * gaps
        psi1 = comp_cumsum(np.concatenate([[-2.0], incr1]))
        # psi is 0 on [0, 2): int_0^2 t**2 dt = 8/3
        u1 = e[:-1] - psi[:-1]
        incr2 = _cube_gap(u1, u1 + gaps)
        cramer = comp_cumsum(np.concatenate([[8.0 / 3.0], incr2]))
        tab = PowerTable(e, loge, psi, psi1, cramer)
        cache._derived["power_table"] = tab
    return tab


def _prepare(x, cache: PrimeCache):
    arr = np.asarray(x, dtype=np.float64)
    if arr.size and np.nanmin(arr) < 0:
        raise DomainError("x must be >= 0")
    if arr.size:
        cache.require(float(np.max(arr)))
    return arr


def _out(arr, scalar):
    return float(arr) if scalar else arr


def _index(events, x):
    # index of the last event <= x, -1 if none
    return np.searchsorted(events, x, side="right") - 1


def theta(x, cache: PrimeCache):
    """Sum of log p over primes p <= x."""
    arr = _prepare(x, cache)
    tab = prime_table(cache)
    j = _index(tab.p, arr)
    out = np.where(j >= 0, tab.theta[np.maximum(j, 0)], 0.0)
    return _out(out, np.ndim(x) == 0)


def delta(x, cache: PrimeCache):
    arr = _prepare(x, cache)
    return _out(np.asarray(theta(arr, cache)) - arr, np.ndim(x) == 0)


def psi(x, cache: PrimeCache):
    """Sum of log p over prime powers p**k <= x."""
    arr = _prepare(x, cache)
    tab = power_table(cache)
    i = _index(tab.e, arr)
    out = np.where(i >= 0, tab.psi[np.maximum(i, 0)], 0.0)
    return _out(out, np.ndim(x) == 0)


def phi(x, cache: PrimeCache):
    """Phi(x) = int_0^x (theta(t) - t) dt, exact."""
    arr = _prepare(x, cache)
    tab = prime_table(cache)
    j = _index(tab.p, arr)
    jj = np.maximum(j, 0)
    h = arr - tab.p[jj]
    local = tab.phi[jj] + (tab.theta[jj] - tab.p[jj]) * h - 0.5 * h * h
    out = np.where(j >= 0, local, -0.5 * arr * arr)
    return _out(out, np.ndim(x) == 0)


def phi_closed_form(x: float, cache: PrimeCache) -> float:
    """Phi(x) straight from sum_{p<=x} log p (x - p) - x**2/2 (exactly rounded sum)."""
    cache.require(x)
    ps = cache.primes[: np.searchsorted(cache.primes, x, side="right")].astype(np.float64)
    return math.fsum(np.log(ps) * (x - ps)) - 0.5 * x * x


def b_of(x, cache: PrimeCache):
    """Normalised primitive b(x) = Phi(x) x^{-3/2} + 2/3 (x > 0)."""
    arr = _prepare(x, cache)
    if arr.size and np.min(arr) <= 0:
        raise DomainError("b(x) needs x > 0")
    out = np.asarray(phi(arr, cache)) * arr ** -1.5 + 2.0 / 3.0
    return _out(out, np.ndim(x) == 0)


def psi_primitive(x, cache: PrimeCache):
    """int_0^x (psi(t) - t) dt, exact."""
    arr = _prepare(x, cache)
    tab = power_table(cache)
    i = _index(tab.e, arr)
    ii = np.maximum(i, 0)
    h = arr - tab.e[ii]
    local = tab.psi1[ii] + (tab.psi[ii] - tab.e[ii]) * h - 0.5 * h * h
    out = np.where(i >= 0, local, -0.5 * arr * arr)
    return _out(out, np.ndim(x) == 0)


def psi_primitive_closed_form(x: float, cache: PrimeCache) -> float:
    values, loge, _ = prime_power_arrays(cache, int(math.floor(x)))
    return math.fsum(loge * (x - values.astype(np.float64))) - 0.5 * x * x


def cramer_integral(x, cache: PrimeCache):
    """int_0^x (psi(t) - t)**2 dt, exact piecewise cubic."""
    arr = _prepare(x, cache)
    tab = power_table(cache)
    i = _index(tab.e, arr)
    ii = np.maximum(i, 0)
    u1 = tab.e[ii] - tab.psi[ii]
    local = tab.cramer[ii] + _cube_gap(u1, arr - tab.psi[ii])
    out = np.where(i >= 0, local, arr ** 3 / 3.0)
    return _out(out, np.ndim(x) == 0)


def chebyshev_point(x: float, cache: PrimeCache) -> ChebyshevPoint:
    th = theta(x, cache)
    ph = phi(x, cache)
    b = ph * x ** -1.5 + 2.0 / 3.0 if x > 0 else math.nan
    return ChebyshevPoint(x, th, psi(x, cache), th - x, ph, b)


# ---------------------------------------------------------------------------
# evaluation grids and sign changes
# ---------------------------------------------------------------------------

def _endpoints(events, lo, hi):
    inside = events[(events >= lo) & (events <= hi)]
    below = np.nextafter(inside, -np.inf)
    below = below[below >= lo]
    pts = np.concatenate([[lo, hi], inside, below])
    return np.unique(pts)


def gap_endpoints(lo: float, hi: float, cache: PrimeCache) -> np.ndarray:
    """Both ends of every prime gap meeting [lo, hi], plus lo and hi.

    Statistics that are monotone between primes reach their extremes on
    this grid: x = p and x = (next prime) - ulp.
    """
    if lo > hi:
        raise ValueError(f"empty range [{lo}, {hi}]")
    cache.require(hi, "hi")
    return _endpoints(prime_table(cache).p, float(lo), float(hi))


def power_endpoints(lo: float, hi: float, cache: PrimeCache) -> np.ndarray:
    """Like :func:`gap_endpoints` for the prime-power events of psi."""
    if lo > hi:
        raise ValueError(f"empty range [{lo}, {hi}]")
    cache.require(hi, "hi")
    return _endpoints(power_table(cache).e, float(lo), float(hi))


def count_sign_changes(values) -> int:
    """Sign changes along a sequence, skipping exact zeros."""
    s = np.sign(np.asarray(values, dtype=np.float64))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def delta_sign_changes(lo: float, hi: float, cache: PrimeCache) -> int:
    """Number of zero crossings of theta(x) - x on [lo, hi].

    Between primes the deviation falls with slope -1 and it jumps up at each
    prime, so sampling both one-sided limits at every prime is exact.
    """
    if lo >= hi:
        return 0
    if lo < 2:
        raise DomainError("delta_sign_changes needs lo >= 2")
    pts = gap_endpoints(lo, hi, cache)
    return count_sign_changes(delta(pts, cache))
