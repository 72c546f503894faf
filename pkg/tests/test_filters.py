import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from ngecho import filters, tls
from ngecho.streams import chunk_rng
from ngecho.validation import time_domain_w4

FAMILIES = {"ramsey": filters.w4_ramsey, "hahn": filters.w4_hahn}
freq = st.floats(-50.0, 50.0)
quads = st.tuples(freq, freq, freq, freq)


def test_ramsey_zero_frequency_limit():
    for tau in (0.3, 1.0, 2.5):
        assert filters.w4_ramsey(np.zeros(4), tau) == pytest.approx(tau ** 4, rel=1e-14)


@pytest.mark.parametrize("k", range(4))
def test_hahn_vanishes_with_any_zero_frequency(k):
    w = np.array([0.7, -1.9, 2.4, 3.1])
    w[k] = 0.0
    assert filters.w4_hahn(w, 1.3) == 0.0


@settings(max_examples=200)
@given(quads, st.floats(0.1, 5.0), st.permutations(range(4)))
def test_permutation_symmetry(w, tau, perm):
    w = np.array(w)
    for fn in FAMILIES.values():
        a = float(fn(w, tau))
        b = float(fn(w[list(perm)], tau))
        assert b == pytest.approx(a, rel=1e-12, abs=1e-14 * tau ** 4)


@settings(max_examples=200)
@given(quads, st.floats(0.1, 5.0))
def test_even_under_sign_flip(w, tau):
    w = np.array(w)
    for fn in FAMILIES.values():
        assert float(fn(-w, tau)) == pytest.approx(float(fn(w, tau)), rel=1e-12, abs=1e-14 * tau ** 4)


@settings(max_examples=200)
@given(quads, st.floats(0.1, 5.0), st.floats(0.1, 10.0))
def test_scaling_law(w, tau, lam):
    w = np.array(w)
    for fn in FAMILIES.values():
        a = float(fn(lam * w, tau / lam))
        b = float(fn(w, tau)) / lam ** 4
        assert a == pytest.approx(b, rel=1e-9, abs=1e-12 * (tau / lam) ** 4)


@pytest.mark.parametrize("family", ["ramsey", "hahn"])
def test_series_crossover_continuity(family):
    tau = 1.7
    factor = filters._ramsey_factor if family == "ramsey" else filters._hahn_factor
    w0 = filters.SERIES_CUTOFF / tau
    below = float(factor(w0 * (1 - 1e-9), tau))
    above = float(factor(w0 * (1 + 1e-9), tau))
    assert above == pytest.approx(below, rel=1e-8)
    # both branches agree with the exact form evaluated in extended precision
    x = np.longdouble(w0 * (1 - 1e-9))
    if family == "ramsey":
        ref = 2 / x * np.sin(x * np.longdouble(tau) / 2)
    else:
        ref = 4 / x * np.sin(x * np.longdouble(tau) / 4) ** 2
    assert below == pytest.approx(float(ref), rel=1e-10)


@pytest.mark.parametrize("family", ["ramsey", "hahn"])
def test_filters_vs_time_domain(family):
    rng = chunk_rng(99, 0)
    tau = 0.9
    for _ in range(3):
        w = rng.uniform(-8.0, 8.0, 3) / tau
        q = np.append(w, -w.sum())
        assert float(FAMILIES[family](q, tau)) == pytest.approx(time_domain_w4(q, tau, family), rel=1e-6)


def test_wrong_arity_rejected():
    with pytest.raises(ValueError):
        filters.w4_ramsey(np.zeros(3), 1.0)


# --- contraction with polyspectra -------------------------------------------------

def test_zero_polyspectrum():
    v, e = filters.gamma_from_polyspectrum(lambda *w: 0.0 * w[0], "ramsey", 1.0, 10.0, 21)
    assert v == 0.0 and e == 0.0


def test_non_finite_polyspectrum_rejected():
    with pytest.raises(ValueError):
        filters.gamma_from_polyspectrum(lambda *w: np.inf + 0.0 * w[0], "hahn", 1.0, 5.0, 11)


def _window_response(s, segs, g):
    tot = 0.0
    for a, b, p in segs:
        if s < a:
            v = (math.exp(-g * (a - s)) - math.exp(-g * (b - s))) / g
        elif s > b:
            v = (math.exp(-g * (s - b)) - math.exp(-g * (s - a))) / g
        else:
            v = (2.0 - math.exp(-g * (s - a)) - math.exp(-g * (b - s))) / g
        tot += p * v
    return tot


def lorentzian_gamma_time_domain(g, tau, family):
    """Gamma = 1/2 kappa(X1, X1, X2, X2) with kappa(t1..t4) = int ds prod exp(-g |t_j - s|)."""
    if family == "ramsey":
        s1, s2 = [(-tau, 0.0, 1)], [(0.0, tau, 1)]
    else:
        s1 = [(-tau, -tau / 2, -1), (-tau / 2, 0.0, 1)]
        s2 = [(0.0, tau / 2, -1), (tau / 2, tau, 1)]

    def f(s):
        return _window_response(s, s1, g) ** 2 * _window_response(s, s2, g) ** 2

    inner = quad(f, -tau, tau, points=[-tau / 2, 0.0, tau / 2], epsabs=0, epsrel=1e-12, limit=200)[0]
    tails = quad(f, -np.inf, -tau, epsabs=0, epsrel=1e-12)[0] + quad(f, tau, np.inf, epsabs=0, epsrel=1e-12)[0]
    return 0.5 * (inner + tails)


@pytest.mark.parametrize("family", ["ramsey", "hahn"])
def test_lorentzian_dual_domain(family):
    v, _ = filters.gamma_from_polyspectrum(filters.lorentzian_polyspectrum(1.0), family, 1.0, 40.0, 121)
    ref = lorentzian_gamma_time_domain(1.0, 1.0, family)
    assert v == pytest.approx(ref, rel=1e-2)


def test_lorentzian_time_domain_frozen():
    assert lorentzian_gamma_time_domain(1.0, 1.0, "ramsey") == pytest.approx(0.09772446787235625, rel=1e-9)


def test_telegraph_polyspectrum_matches_closed_form():
    rate, v, tau = 0.5, 1.0, 1.0
    g, _ = filters.gamma_from_polyspectrum(filters.telegraph_polyspectrum(rate, v), "ramsey", tau, 40.0, 121)
    assert g == pytest.approx(tls.gamma4_ensemble([v], rate, tau, tau), rel=2e-2)


def test_telegraph_polyspectrum_symmetric():
    p = filters.telegraph_polyspectrum(0.7, 1.3)
    w = (0.4, -1.1, 2.0)
    q = np.array(w + (-sum(w),))
    base = p(*q)
    assert p(*q[[2, 0, 3, 1]]) == pytest.approx(base, rel=1e-12)
    assert p(*(-q)) == pytest.approx(base, rel=1e-12)
    assert base < 0
