"""Independent reference implementations used only by the tests."""
import math

import numpy as np


def trial_division_primes(n):
    out = []
    for m in range(2, n + 1):
        r = math.isqrt(m)
        if all(m % p for p in out if p <= r):
            out.append(m)
    return out


def bytearray_sieve(n):
    """Unsegmented sieve over all integers; shares no code with the package."""
    flags = bytearray([1]) * (n + 1)
    flags[0:2] = b"\x00\x00"
    for p in range(2, math.isqrt(n) + 1):
        if flags[p]:
            flags[p * p::p] = bytes(len(range(p * p, n + 1, p)))
    return np.frombuffer(bytes(flags), dtype=np.uint8).nonzero()[0]


def prime_powers(primes, n):
    ev = []
    for p in primes:
        if p > n:
            break
        q = p
        while q <= n:
            ev.append((q, math.log(p)))
            q *= p
    ev.sort()
    return ev


def step_sum(events, t):
    """Right-continuous sum of weights of events <= t (events sorted)."""
    return math.fsum(w for v, w in events if v <= t)


def midpoint(f, a, b, h):
    n = int(round((b - a) / h))
    t = a + (np.arange(n) + 0.5) * h
    return float(np.sum(f(t)) * h)


def step_function(events):
    """Vectorised right-continuous step function for a sorted event list."""
    vals = np.array([v for v, _ in events], dtype=float)
    cum = np.concatenate([[0.0], np.cumsum([w for _, w in events])])

    def f(t):
        return cum[np.searchsorted(vals, t, side="right")]
    return f
