"""Segmented prime sieve, prime-power streaming and the on-disk prime cache."""
from __future__ import annotations

import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

MAGIC = b"NPLC"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")

DEFAULT_SEGMENT = 1 << 20
DEFAULT_MAX_LIMIT = 1 << 34


class CapacityError(MemoryError):
    """Requested limit exceeds the configured memory budget."""


class InsufficientCacheError(ValueError):
    """An argument lies beyond the cache's sieved limit."""


class CacheFormatError(ValueError):
    """Base class for malformed cache files."""


class BadMagicError(CacheFormatError):
    pass


class VersionMismatchError(CacheFormatError):
    pass


class TruncatedFileError(CacheFormatError):
    pass


class CountMismatchError(CacheFormatError):
    pass


@dataclass(frozen=True, eq=False)
class PrimeCache:
    """All primes ``<= limit`` in ascending order (read-only int64 array)."""

    limit: int
    primes: np.ndarray
    # memo for tables derived from the primes (see chebyshev.prime_table)
    _derived: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.primes.setflags(write=False)

    @property
    def count(self) -> int:
        return int(self.primes.shape[0])

    def __eq__(self, other):
        if not isinstance(other, PrimeCache):
            return NotImplemented
        return self.limit == other.limit and np.array_equal(self.primes, other.primes)

    __hash__ = object.__hash__

    def require(self, x, what="x"):
        if x > self.limit:
            raise InsufficientCacheError(
                f"{what}={x} exceeds cache limit {self.limit}")


class PrimePowerEvent(NamedTuple):
    value: int
    base_log: float
    exponent: int


# ---------------------------------------------------------------------------
# sieve
# ---------------------------------------------------------------------------

def simple_sieve(limit: int) -> np.ndarray:
    """Plain Eratosthenes; used for the base primes up to sqrt(limit)."""
    if limit < 2:
        return np.zeros(0, dtype=np.int64)
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if is_prime[p]:
            is_prime[p * p::p] = False
    return np.flatnonzero(is_prime).astype(np.int64)


def _sieve_segment(low: int, high: int, base: np.ndarray) -> np.ndarray:
    """Odd primes in ``[low, high)``; ``low`` odd, ``base`` odd primes."""
    n = (high - low + 1) // 2
    mask = np.ones(n, dtype=bool)
    for p in base:
        p = int(p)
        p2 = p * p
        if p2 >= high:
            break
        start = max(p2, -(-low // p) * p)
        if start % 2 == 0:
            start += p
        if start >= high:
            continue
        mask[(start - low) // 2::p] = False
    return low + 2 * np.flatnonzero(mask).astype(np.int64)


def build_cache(limit: int, segment_size: int = DEFAULT_SEGMENT, workers: int = 1,
                max_limit: int = DEFAULT_MAX_LIMIT) -> PrimeCache:
    """Sieve every prime ``<= limit``.

    ``segment_size`` counts odd values per segment. Segments may be sieved
    on a thread pool; they are always concatenated in ascending order so the
    result does not depend on ``segment_size`` or ``workers``.
    """
    limit = int(limit)
    if limit < 2:
        raise ValueError(f"limit must be >= 2, got {limit}")
    if segment_size < 64:
        raise ValueError(f"segment_size must be >= 64, got {segment_size}")
    if limit > max_limit:
        raise CapacityError(
            f"limit {limit} exceeds the memory budget max_limit={max_limit}")

    base = simple_sieve(math.isqrt(limit))
    odd_base = base[1:]
    span = 2 * segment_size
    lows = list(range(3, limit + 1, span))

    def run(low):
        return _sieve_segment(low, min(low + span, limit + 1), odd_base)

    if workers > 1 and len(lows) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, lows))
    else:
        parts = [run(low) for low in lows]
    primes = np.concatenate([np.array([2], dtype=np.int64)] + parts)
    return PrimeCache(limit, primes)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def save_cache(cache: PrimeCache, path) -> None:
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, cache.limit, cache.count)
    payload = np.ascontiguousarray(cache.primes, dtype="<u8").tobytes()
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    os.replace(tmp, path)


def read_header(path):
    """``(limit, count)`` from a cache file, after validating it."""
    size = os.path.getsize(path)
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: not a prime cache (bad magic {raw[:4]!r})")
    if len(raw) < _HEADER.size:
        raise TruncatedFileError(f"{path}: truncated header")
    _, version, limit, count = _HEADER.unpack(raw)
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{path}: format version {version}, expected {FORMAT_VERSION}")
    expected = _HEADER.size + 8 * count
    if size < expected:
        raise TruncatedFileError(
            f"{path}: payload truncated ({size} bytes, header promises {expected})")
    if size > expected:
        raise CountMismatchError(
            f"{path}: {size - expected} bytes beyond the {count} primes in the header")
    return limit, count


def load_cache(path) -> PrimeCache:
    limit, count = read_header(path)
    primes = np.fromfile(path, dtype="<u8", count=count, offset=_HEADER.size)
    if primes.shape[0] != count:
        raise TruncatedFileError(f"{path}: payload truncated")
    return PrimeCache(int(limit), primes.astype(np.int64))


# ---------------------------------------------------------------------------
# prime powers
# ---------------------------------------------------------------------------

def prime_power_arrays(cache: PrimeCache, limit: int):
    """Ascending ``(values, base_logs, exponents)`` for all ``p**k <= limit``."""
    cache.require(limit, "limit")
    limit = int(limit)
    if limit < 2:
        empty = np.zeros(0, dtype=np.int64)
        return empty, np.zeros(0), empty
    ps = cache.primes[: np.searchsorted(cache.primes, limit, side="right")]
    vals, bases, exps = [ps], [ps], [np.ones(ps.shape[0], dtype=np.int64)]
    k = 2
    while True:
        root = int(round(limit ** (1.0 / k)))
        while root ** k > limit:
            root -= 1
        while (root + 1) ** k <= limit:
            root += 1
        if root < 2:
            break
        b = ps[: np.searchsorted(ps, root, side="right")]
        vals.append(b ** k)
        bases.append(b)
        exps.append(np.full(b.shape[0], k, dtype=np.int64))
        k += 1
    values = np.concatenate(vals)
    order = np.argsort(values, kind="stable")
    base = np.concatenate(bases)[order]
    return values[order], np.log(base.astype(np.float64)), np.concatenate(exps)[order]


def stream_prime_powers(cache: PrimeCache, limit: int) -> Iterator[PrimePowerEvent]:
    values, logs, exps = prime_power_arrays(cache, limit)
    for v, lg, e in zip(values.tolist(), logs.tolist(), exps.tolist()):
        yield PrimePowerEvent(v, lg, e)
