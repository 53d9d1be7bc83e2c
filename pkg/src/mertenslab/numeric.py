"""Error-controlled real arithmetic.

Compensated (Neumaier) summation, a vectorised adaptive Gauss-Kronrod
integrator with nested-rule error bounds, and the constants shared by the
rest of the package.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from numba import njit

GAMMA = 0.57721566490153286060651209008240243
PI = math.pi
EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class Constants:
    gamma: float = GAMMA
    pi: float = PI


CONSTANTS = Constants()


class DomainError(ValueError):
    """Argument outside the domain where the quantity is real/finite."""


class BudgetError(RuntimeError):
    """A requested tolerance cannot be met with the available resources.

    ``achieved`` is the best bound reached; ``required`` names what would
    have been needed (a cache limit, a cutoff, ...) when known.
    """

    def __init__(self, message, achieved=None, required=None):
        super().__init__(message)
        self.achieved = achieved
        self.required = required


# ---------------------------------------------------------------------------
# compensated summation
# ---------------------------------------------------------------------------

class CompensatedAccumulator:
    """Running Neumaier sum: ``total() == principal + compensation``."""

    __slots__ = ("principal", "compensation")

    def __init__(self, value=0.0):
        self.principal = float(value)
        self.compensation = 0.0

    def add(self, value):
        value = float(value)
        s = self.principal + value
        if abs(self.principal) >= abs(value):
            self.compensation += (self.principal - s) + value
        else:
            self.compensation += (value - s) + self.principal
        self.principal = s
        return self

    def __iadd__(self, value):
        return self.add(value)

    def merge(self, other: "CompensatedAccumulator"):
        self.add(other.principal)
        self.add(other.compensation)
        return self

    def total(self) -> float:
        return self.principal + self.compensation

    def __repr__(self):
        return f"CompensatedAccumulator({self.total()!r})"


@njit(cache=True)
def _neumaier_sum(values):
    s = 0.0
    c = 0.0
    for v in values:
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c


@njit(cache=True)
def _neumaier_cumsum(values, out):
    s = 0.0
    c = 0.0
    for i in range(values.shape[0]):
        v = values[i]
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out[i] = s + c
    return out


def comp_sum(values: Iterable[float]) -> float:
    """Compensated total of ``values`` in the given order."""
    if isinstance(values, np.ndarray):
        arr = np.ascontiguousarray(values, dtype=np.float64).ravel()
        return float(_neumaier_sum(arr))
    acc = CompensatedAccumulator()
    for v in values:
        acc.add(v)
    return acc.total()


def comp_cumsum(values) -> np.ndarray:
    """Inclusive prefix sums, each compensated over the whole prefix."""
    arr = np.ascontiguousarray(values, dtype=np.float64).ravel()
    return _neumaier_cumsum(arr, np.empty_like(arr))


def comp_suffix(values) -> np.ndarray:
    """``out[i] = sum(values[i:])``, accumulated from the far end."""
    arr = np.ascontiguousarray(values, dtype=np.float64).ravel()
    rev = np.ascontiguousarray(arr[::-1])
    return _neumaier_cumsum(rev, np.empty_like(rev))[::-1].copy()


# ---------------------------------------------------------------------------
# value with error
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValueWithError:
    value: float
    error_bound: float = 0.0

    def __post_init__(self):
        if not self.error_bound >= 0.0:
            raise ValueError(f"error_bound must be >= 0, got {self.error_bound}")

    def _coerce(self, other):
        if isinstance(other, ValueWithError):
            return other
        return ValueWithError(float(other), 0.0)

    def __add__(self, other):
        o = self._coerce(other)
        return ValueWithError(self.value + o.value, self.error_bound + o.error_bound)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return ValueWithError(self.value - o.value, self.error_bound + o.error_bound)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __neg__(self):
        return ValueWithError(-self.value, self.error_bound)

    def scale(self, factor: float) -> "ValueWithError":
        return ValueWithError(self.value * factor, self.error_bound * abs(factor))

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return abs(x - self.value) <= self.error_bound + slack

    @property
    def lo(self):
        return self.value - self.error_bound

    @property
    def hi(self):
        return self.value + self.error_bound


# ---------------------------------------------------------------------------
# logs
# ---------------------------------------------------------------------------

def log_log(x):
    """``log(log x)``; defined for ``x > 1`` only."""
    if np.ndim(x) == 0:
        if not x > 1.0:
            raise DomainError(f"log_log needs x > 1, got {x}")
        return math.log(math.log(x))
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(arr > 1.0):
        raise DomainError(f"log_log needs x > 1, got min {arr.min()}")
    return np.log(np.log(arr))


# ---------------------------------------------------------------------------
# Gauss-Kronrod (7, 15)
# ---------------------------------------------------------------------------

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# 15 abscissae on [-1, 1] and matching weights; Gauss weights sit on the odd
# Kronrod nodes (indices 1, 3, 5 and the centre).
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
for _i, _w in zip((1, 3, 5, 7), _WG):
    GAUSS_WEIGHTS[_i] = _w
    GAUSS_WEIGHTS[14 - _i] = _w

# f(t, owner) -> values; t has shape (m, 15), owner (m,) indexes the original
# partition piece each row lies in.
PieceIntegrand = Callable[[np.ndarray, np.ndarray], np.ndarray]


def gauss_kronrod(f: PieceIntegrand, left, right, owner=None):
    """One GK15 pass over many intervals at once.

    Returns ``(kronrod, error, roundoff)`` arrays. ``error`` is the
    nested-rule difference ``|K15 - G7|`` floored by the roundoff term.
    """
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    if owner is None:
        owner = np.arange(left.shape[0])
    half = 0.5 * (right - left)
    centre = 0.5 * (right + left)
    t = centre[:, None] + half[:, None] * NODES[None, :]
    fv = np.asarray(f(t, owner), dtype=np.float64)
    if not np.all(np.isfinite(fv)):
        bad = np.argwhere(~np.isfinite(fv))[0]
        raise DomainError(f"integrand not finite at t={t[tuple(bad)]!r}")
    kron = half * (fv @ KRONROD_WEIGHTS)
    gauss = half * (fv @ GAUSS_WEIGHTS)
    resabs = np.abs(half) * (np.abs(fv) @ KRONROD_WEIGHTS)
    err = np.maximum(np.abs(kron - gauss), 50.0 * EPS * resabs)
    return kron, err, 50.0 * EPS * resabs


def integrate_partition(f: PieceIntegrand, edges, tol: float,
                        max_intervals: int = 10_000_000,
                        chunk: int = 1 << 16):
    """Integrate ``f`` over every piece ``[edges[i], edges[i+1]]``.

    Each piece is refined by bisection until its nested-rule error is below
    ``tol`` times its share of the total length. Returns per-piece
    ``(values, error_bounds)``; raises :class:`BudgetError` if more than
    ``max_intervals`` subintervals would be needed.
    """
    edges = np.asarray(edges, dtype=np.float64)
    n = edges.shape[0] - 1
    if n < 1:
        return np.zeros(0), np.zeros(0)
    if not np.all(np.diff(edges) >= 0):
        raise ValueError("edges must be non-decreasing")
    total_len = edges[-1] - edges[0]
    values = np.zeros(n)
    errors = np.zeros(n)
    if total_len == 0:
        return values, errors

    pending = (edges[:-1], edges[1:], np.arange(n))
    used = n
    while pending[0].shape[0]:
        left, right, owner = pending
        nxt_l, nxt_r, nxt_o = [], [], []
        for s in range(0, left.shape[0], chunk):
            l, r, o = left[s:s + chunk], right[s:s + chunk], owner[s:s + chunk]
            kron, err, roundoff = gauss_kronrod(f, l, r, o)
            allowed = tol * (r - l) / total_len
            # roundoff-dominated pieces cannot improve by bisection
            ok = (err <= allowed) | (err <= roundoff) \
                | (r - l <= 4 * EPS * np.maximum(abs(l), abs(r)))
            np.add.at(values, o[ok], kron[ok])
            np.add.at(errors, o[ok], err[ok])
            if not ok.all():
                bl, br, bo = l[~ok], r[~ok], o[~ok]
                mid = 0.5 * (bl + br)
                nxt_l += [bl, mid]
                nxt_r += [mid, br]
                nxt_o += [bo, bo]
                used += bl.shape[0]
                if used > max_intervals:
                    raise BudgetError(
                        f"quadrature needs more than {max_intervals} subintervals",
                        achieved=float(errors.sum() + err[~ok].sum()))
        if nxt_l:
            pending = (np.concatenate(nxt_l), np.concatenate(nxt_r),
                       np.concatenate(nxt_o))
        else:
            break
    return values, errors


def adaptive_integral(f: Callable, a: float, b: float, tol: float = 1e-10,
                      breakpoints=None, max_intervals: int = 100_000) -> ValueWithError:
    """Integral of a vectorised ``f`` over ``[a, b]`` with a nested-rule bound.

    ``breakpoints`` (e.g. known kinks) are used as initial subdivision points.
    """
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    if not tol > 0:
        raise ValueError("tol must be positive")
    edges = [a, b]
    if breakpoints is not None:
        bp = np.asarray(breakpoints, dtype=np.float64)
        bp = bp[(bp > a) & (bp < b)]
        edges = np.concatenate([[a], np.unique(bp), [b]])

    def g(t, owner):
        return f(t)

    vals, errs = integrate_partition(g, edges, tol, max_intervals=max_intervals)
    bound = comp_sum(errs)
    if bound > tol:
        raise BudgetError(f"achieved bound {bound:.3g} exceeds tol {tol:.3g}",
                          achieved=bound)
    return ValueWithError(comp_sum(vals), bound)
