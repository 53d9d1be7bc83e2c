import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mertenslab.chebyshev import delta, phi
from mertenslab.mertens import mertens_arrays, mertens_point
from mertenslab.numeric import BudgetError, DomainError, PI
from mertenslab.primes import InsufficientCacheError, build_cache
from mertenslab.rh_criteria import (CHECK_IDS, CheckParams, D_of, E_of, E_quadrature,
                                    F_arrays, F_of, H_of, H_partial, decompose,
                                    e_tail_model, integrand_E, log1p_minus, run_check,
                                    tail_T, u_v_points, uv_tail_bound, weight)

from oracles import midpoint, trial_division_primes

# [DERIVED] mpmath at 40 digits from the four primes below 10 (T(1) is the
# difference of the Euler and Meissel-Mertens constants)
T_1 = 0.31571845205389008
T_10 = 0.016002408434788516
H_10 = -0.39795171348200856
D_10 = 0.14251854504941125
F_10 = -0.11521834295727105
E_10 = H_10 - D_10 - F_10        # the identity H = D + E + F fixes the true E(10)
U_TERM_2 = 1 / 3 - 1 / math.log(6)


def test_tail_T(small_cache):
    t1 = tail_T(1, small_cache)
    assert t1.error_bound == 1 / (2 * 10**6)
    assert t1.contains(T_1)
    t10 = tail_T(10, small_cache)
    assert t10.contains(T_10)
    assert abs(t10.value - (t1.value - (mertens_point(10, small_cache).S
                                        - mertens_point(10, small_cache).P))) < 1e-15
    assert tail_T(10**6, small_cache).value == 0.0


def test_tail_T_monotone(small_cache):
    xs = np.geomspace(1, 1e6, 200)
    vals = [tail_T(x, small_cache).value for x in xs]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_tail_T_budget(small_cache):
    with pytest.raises(BudgetError, match="2500000"):
        tail_T(10, small_cache, tol=2e-7)
    with pytest.raises(DomainError):
        tail_T(0.5, small_cache)


def test_H_at_10(small_cache):
    h = H_of(10, small_cache)
    assert h.contains(H_10)
    assert h.value * math.sqrt(10) * math.log(10) == pytest.approx(-2.8976, abs=1e-3)
    with pytest.raises(DomainError):
        H_of(2, small_cache)


def test_H_negative(small_cache):
    for x in np.geomspace(10, 1e6, 300):
        assert H_of(x, small_cache).hi < 0


def test_H_partial(small_cache):
    assert H_partial(10, 10, small_cache) == 0.0
    expected = 1 / 11 - math.log(math.log(math.log(2310))) + math.log(math.log(math.log(210)))
    assert H_partial(10, 11, small_cache) == pytest.approx(expected, abs=1e-15)
    with pytest.raises(DomainError):
        H_partial(20, 10, small_cache)
    with pytest.raises(InsufficientCacheError):
        H_partial(10, 2e6, small_cache)


@pytest.mark.parametrize("x", [10.0, 1000.0, 12345.6])
def test_H_partial_converges_to_H(small_cache, x):
    """H(x) - H(x, y) = H(y); with |H(y)| <= 3/(sqrt y log y) the gap shrinks."""
    hx = H_of(x, small_cache)
    for y in (1e4, 1e5, 1e6):
        if y <= x:
            continue
        hy = H_of(y, small_cache)
        gap = hx.value - H_partial(x, y, small_cache)
        assert abs(gap - hy.value) <= 1e-14
        assert abs(gap) <= 3 / (math.sqrt(y) * math.log(y)) + hx.error_bound


def test_D_at_10(small_cache):
    assert D_of(10, small_cache) == pytest.approx(D_10, abs=1e-15)
    xs = np.geomspace(3, 1e6, 200)
    for x in xs:
        if phi(x, small_cache) < 0:
            assert D_of(x, small_cache) > 0


def test_log1p_minus():
    z = np.array([-0.5, -1e-3, -1e-9, 0.0, 1e-12, 1e-4, 0.09, 0.5, 3.0])
    ref = np.array([math.log1p(v) - v if abs(v) >= 0.1 else
                    math.fsum((-1) ** (k + 1) * v ** k / k for k in range(2, 40)) for v in z])
    assert np.allclose(log1p_minus(z), ref, rtol=1e-14, atol=0)
    assert np.all(log1p_minus(z) <= 0)


def test_F(small_cache):
    assert F_of(10, small_cache) == pytest.approx(F_10, abs=1e-15)
    xs = np.geomspace(3, 1e6, 5000)
    assert np.all(F_arrays(xs, small_cache) <= 0)
    # theta(x) = x gives F = 0: log1p_minus(0) vanishes exactly
    assert log1p_minus(np.array([0.0]))[0] == 0.0


@settings(max_examples=200, deadline=None)
@given(x=st.floats(3, 1e6))
def test_F_nonpositive_property(small_cache, x):
    assert F_of(x, small_cache) <= 0


def test_F_scaled_bounded(small_cache):
    xs = np.geomspace(1e3, 1e6, 2000)
    assert np.max(np.abs(F_arrays(xs, small_cache)) * xs / np.log(xs) ** 3) < 1.0


def test_integrand_at_10(small_cache):
    lt = math.log(10)
    w = (2 + 3 / lt + 2 / lt**2) / (1000 * lt)
    assert weight(10.0) == pytest.approx(w, rel=1e-15)
    assert integrand_E(10, small_cache) == pytest.approx(phi(10, small_cache) * w, rel=1e-15)


def test_E_at_10(small_cache):
    e = E_of(10, 1e6, small_cache)
    assert e.value < 0
    assert abs(e.value) == pytest.approx(8 / (3 * math.sqrt(10) * math.log(10)), rel=0.2)
    assert e.contains(E_10)


def test_E_quadrature_against_midpoint(small_cache):
    """Independent Phi (closed form over trial-division primes), midpoint rule.

    Cell edges fall on the integers, so the kinks of Phi at primes are cell
    edges and Richardson extrapolation of the h**2 error term is valid."""
    ps = np.array(trial_division_primes(1000), dtype=float)
    csum_log = np.concatenate([[0.0], np.cumsum(np.log(ps))])
    csum_plog = np.concatenate([[0.0], np.cumsum(ps * np.log(ps))])

    def f(t):
        cut = np.searchsorted(ps, t, side="right")
        return (t * csum_log[cut] - csum_plog[cut] - 0.5 * t * t) * weight(t)

    m1, m2 = midpoint(f, 10, 1000, 1e-2), midpoint(f, 10, 1000, 2e-2)
    ref = (4 * m1 - m2) / 3
    got = E_quadrature(10, 1000, small_cache)
    assert abs(got.value - m1) < 1e-6 * abs(m1)
    assert abs(got.value - ref) < 1e-10 * abs(ref)


def test_E_shrinking_interval(small_cache):
    x = 1234.5
    prev = math.inf
    for eps in (1.0, 1e-2, 1e-4, 1e-6, 1e-8):
        v = abs(E_quadrature(x, x + eps, small_cache).value)
        assert v <= prev
        prev = v
    # the integral vanishes linearly; rel tol covers ulp(x)/eps
    assert prev / 1e-8 == pytest.approx(abs(integrand_E(x, small_cache)), rel=1e-4)


def test_E_tail_model():
    # the modelled tail against a direct quadrature of -(2/3) t^1.5 w(t)
    from scipy.integrate import quad
    for t_max in (1e4, 1e6, 1e8):
        s = math.log(t_max)
        ref, _ = quad(lambda u: -(2 / 3) * math.exp(2.5 * u) * weight(math.exp(u)),
                      s, s + 200, epsabs=0, epsrel=1e-12, limit=200)
        assert e_tail_model(t_max) == pytest.approx(ref, rel=1e-9)
        assert abs(e_tail_model(t_max)) == pytest.approx(
            8 / (3 * math.sqrt(t_max) * s), rel=0.5)


def test_E_budget(small_cache):
    with pytest.raises(BudgetError, match="t_max"):
        E_of(10, 1e4, small_cache, rel_tol=1e-8)
    with pytest.raises(DomainError):
        E_of(10, 10, small_cache)
    with pytest.raises(InsufficientCacheError):
        E_of(10, 1e7, small_cache)


@pytest.mark.parametrize("x", [10.0, 100.0, 1e3, 1e4, 99_999.5])
def test_decomposition_identity(small_cache, x):
    d = decompose(x, 1e6, small_cache)
    assert abs(d.residual.value) <= d.residual.error_bound
    assert d.H.value <= d.D + d.E.value + d.H.error_bound + d.E.error_bound
    assert d.F <= 0
    assert d.conditional == ("E_tail",)
    assert set(d.to_dict()) >= {"x", "H", "T", "D", "E", "F", "residual"}


def test_u_v_points(small_cache):
    (p1, p2) = u_v_points([1, 2], small_cache)
    assert p1.p_k == 2 and p2.p_k == 3
    assert p1.U.value - p2.U.value == pytest.approx(U_TERM_2, abs=1e-14)
    pts = u_v_points(range(1, 2000, 7), small_cache)
    assert all(p.V.value >= abs(p.U.value) for p in pts)
    with pytest.raises(InsufficientCacheError):
        u_v_points([10**6], small_cache)
    with pytest.raises(ValueError):
        u_v_points([5, 3], small_cache)


def test_uk_consistency(small_cache):
    """|U_k + Q(p_k)| <= 1/p_k + tail bound."""
    for p in u_v_points(range(100, 10_001, 37), small_cache):
        q = mertens_arrays([float(p.p_k)], small_cache)["Q"][0]
        assert abs(p.U.value + q) <= 1 / p.p_k + p.U.error_bound


def test_uv_tail_bound_scaling():
    prev = math.inf
    for L in (1e5, 2e5, 4e5, 8e5, 1.6e6, 1e8, 2e8):
        b = uv_tail_bound(L)
        model = math.log(L) ** 2 / (4 * PI * math.sqrt(L))
        assert b < prev
        assert 1 < b / model < 2
        prev = b
    # doubling L shrinks the bound by about log^2(2L)/log^2(L)/sqrt(2)
    L = 1e8
    ratio = uv_tail_bound(2 * L) / uv_tail_bound(L)
    assert ratio == pytest.approx((math.log(2 * L) / math.log(L)) ** 2 / math.sqrt(2), rel=0.01)


def test_cutoff_stability(small_cache):
    """A 10x larger cutoff moves each value by less than the earlier bound."""
    for x in (10.0, 100.0, 1e4):
        a, b = tail_T(x, small_cache, cutoff=1e5), tail_T(x, small_cache)
        assert abs(a.value - b.value) < a.error_bound
        a, b = E_of(x, 1e5, small_cache), E_of(x, 1e6, small_cache)
        assert abs(a.value - b.value) < a.error_bound
    ks = [100, 1000, 5000]
    for a, b in zip(u_v_points(ks, small_cache, cutoff=1e5), u_v_points(ks, small_cache)):
        assert abs(a.U.value - b.U.value) < a.U.error_bound
        assert abs(a.V.value - b.V.value) < a.V.error_bound


# ---------------------------------------------------------------------------
# bound checks
# ---------------------------------------------------------------------------

def test_unknown_check(small_cache):
    with pytest.raises(ValueError, match="unknown"):
        run_check("riemann", (10, 100), small_cache)


def test_koch_small_range(small_cache):
    r = run_check("koch_22iii", (1e3, 1e6), small_cache)
    assert r.violation_count == 0 and r.onset == 1e3 and not r.persistent
    lo, arglo, hi, arghi = r.extrema
    assert 1e3 <= arglo <= 1e6 and 1e3 <= arghi <= 1e6
    assert -1 < lo < hi < 1


def test_ingham_at_10(small_cache):
    r = run_check("ingham_prop4", (10, 10), small_cache)
    assert r.points_evaluated == 1 and r.violation_count == 1
    v = r.violations[0]
    assert v.at == 10 and v.lhs == pytest.approx(16.235826792359556 / 10**1.5, rel=1e-12)
    assert r.persistent


def test_ingham_onset(small_cache):
    r = run_check("ingham_prop4", (10, 1e6), small_cache)
    assert r.violation_count > 0 and r.onset is not None and r.onset <= 1e3
    assert all(v.at < r.onset for v in r.violations)


def test_narrow_A_at_10(small_cache):
    r = run_check("narrow_A_18", (10, 10), small_cache)
    assert r.extrema[0] == r.extrema[2] == pytest.approx(2.781130787972413, rel=1e-12)


def test_narrow_H_delta0(small_cache):
    wide = run_check("narrow_H_25", (1e4, 1e6), small_cache, CheckParams(delta0=0.3))
    narrow = run_check("narrow_H_25", (1e4, 1e6), small_cache, CheckParams(delta0=0.01))
    assert wide.violation_count == 0 < narrow.violation_count
    assert wide.extrema == narrow.extrema


@settings(max_examples=15, deadline=None)
@given(check=st.sampled_from(["robin_13", "koch_22iii", "ingham_prop4", "cramer_31iii",
                              "narrow_A_18"]),
       lo=st.floats(3, 1e5), span=st.floats(1, 1e5))
def test_report_invariants(small_cache, check, lo, span):
    hi = min(lo + span, 1e6)
    r = run_check(check, (lo, hi), small_cache,
                  CheckParams(cramer_bound=0.02, ingham_bound=0.05))
    assert r.violation_count >= len(r.violations) - 1
    mn, argmn, mx, argmx = r.extrema
    if r.points_evaluated:
        assert lo <= argmn <= hi and lo <= argmx <= hi and mn <= mx
    for v in r.violations:
        assert lo <= v.at <= hi
        if check == "koch_22iii":
            assert abs(delta(v.at, small_cache)) == v.lhs > v.rhs
        if check == "robin_13":
            assert abs(mertens_arrays([v.at], small_cache)["R"][0]) == v.lhs > v.rhs


@pytest.mark.parametrize("check", CHECK_IDS)
def test_workers_and_chunks_deterministic(small_cache, check):
    rng = (100, 5000) if check in ("uk_35", "vk_35") else (1e4, 2e5)
    a = run_check(check, rng, small_cache)
    b = run_check(check, rng, small_cache, CheckParams(workers=3, chunk=997))
    assert a.to_dict() == b.to_dict()


def test_uv_checks(small_cache):
    r = run_check("uk_35", (100, 10_000), small_cache)
    assert r.violation_count == 0 and r.conditional
    r = run_check("vk_35", (1000, 10_000), small_cache)
    assert r.extrema[2] < 1.25 / (4 * PI)
    assert "V_upper_normalized" in r.extra
