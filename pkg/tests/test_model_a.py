import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ngecho import model_a
from ngecho.streams import chunk_rng

pos = st.floats(1e-2, 1e2)


# --- Ginzburg-Landau coefficients ------------------------------------------------------

def test_gl_example():
    p = model_a.gl_from_ising(1.0, 5.0, 1.0)
    assert (p.T_C, p.K, p.r) == (4.0, 0.5, 1.0)
    assert p.u == pytest.approx(4.0 / 3.0, rel=1e-15)
    assert p.xi_c == pytest.approx(math.sqrt(0.5), rel=1e-15)


def test_critical_limit_and_ordered_phase():
    for eps in (1e-2, 1e-4, 1e-6):
        p = model_a.gl_from_ising(1.0, 4.0 + eps, 1.0)
        assert p.r == pytest.approx(eps, rel=1e-8)
        assert p.xi_c == pytest.approx(math.sqrt(0.5 / eps), rel=1e-7)
    for t in (4.0, 3.0):
        with pytest.raises(ValueError):
            model_a.gl_from_ising(1.0, t, 1.0)
    with pytest.raises(ValueError):
        model_a.gl_from_ising(-1.0, 5.0, 1.0)


@given(pos, st.floats(1.01, 10.0), pos)
def test_gl_ratios(j, t_ratio, a):
    p = model_a.gl_from_ising(j, t_ratio * 4.0 * j, a)
    assert p.r / p.u == pytest.approx(3.0 * (p.T - p.T_C) / p.T_C, rel=1e-12)
    assert p.K / p.u == pytest.approx(3.0 * a * a / 8.0, rel=1e-12)
    assert p.tau_c == pytest.approx(p.gamma_relax / p.r, rel=1e-12)


# --- propagators and vertex ---------------------------------------------------------------

def test_gamma_q_and_static_propagators():
    p = model_a.gl_from_ising(1.0, 5.0, 1.0, gamma_relax=0.7)
    assert model_a.gamma_q(0.0, p) == pytest.approx(p.r, rel=1e-15)
    dk, dr = model_a.propagators(0.0, 0.0, p)
    assert dr == pytest.approx(-1.0 / p.r, rel=1e-15)
    assert dk == pytest.approx(-2j * p.gamma_relax * p.T / p.r ** 2, rel=1e-15)


@settings(max_examples=200)
@given(st.floats(0.0, 10.0), st.floats(-10.0, 10.0).filter(lambda w: abs(w) > 1e-6),
       st.floats(0.1, 5.0), st.floats(4.1, 20.0))
def test_fluctuation_dissipation(q, w, g, t):
    p = model_a.gl_from_ising(1.0, t, 1.0, gamma_relax=g)
    dk, dr = model_a.propagators(q, w, p)
    ref = (dr - np.conj(dr)) * p.T / w
    assert abs(dk - ref) <= 1e-12 * abs(dk)
    assert dk.imag < 0


@settings(max_examples=100)
@given(st.tuples(*[st.floats(0.0, 5.0)] * 4), st.tuples(*[st.floats(-5.0, 5.0)] * 3))
def test_vertex_matches_propagator_assembly(qs, w):
    p = model_a.gl_from_ising(1.0, 5.0, 1.0)
    omegas = w + (-sum(w),)
    a = model_a.tree_vertex(qs, omegas, p)
    b = model_a.tree_vertex_from_propagators(qs, omegas, p)
    assert abs(b - a) <= 1e-10 * abs(a)
    assert a < 0


# --- short-time estimate --------------------------------------------------------------------

@pytest.mark.parametrize("proposal,mean", [("gamma", 3.0), ("exp", 1.0)])
def test_radial_draw_moments(proposal, mean):
    q = model_a.radial_draws(400_000, chunk_rng(2, 0), proposal)
    assert q.shape == (400_000, 3)
    assert q.mean() == pytest.approx(mean, rel=5e-3)
    assert q.var() == pytest.approx(mean, rel=1e-2)
    with pytest.raises(ValueError):
        model_a.radial_draws(10, chunk_rng(2, 0), "uniform")


def test_s_doubling_scales_by_sixteen():
    a = model_a.f_short_time(1.0, 0.1, 2000, 4)
    b = model_a.f_short_time(1.0, 0.2, 2000, 4)
    assert b.value == pytest.approx(16.0 * a.value, rel=1e-13)


def test_importance_sampling_matches_quadrature():
    ref = model_a.momentum_quadrature(1.0)
    est = model_a.f_short_time(1.0, 0.1, 400_000, 7)
    assert est.expectation == pytest.approx(ref, rel=5e-2)
    assert abs(est.expectation - ref) <= 3.0 * est.expectation_err + 2e-3 * ref


def test_proposals_agree():
    for x in (0.5, 1.0, 3.0):
        a = model_a.f_short_time(x, 0.1, 200_000, 1, proposal="gamma")
        b = model_a.f_short_time(x, 0.1, 200_000, 2, proposal="exp")
        assert abs(a.value - b.value) <= 3.0 * math.hypot(a.std_err, b.std_err)


def test_standard_error_scaling_and_determinism():
    a = model_a.f_short_time(1.0, 0.1, 50_000, 3)
    b = model_a.f_short_time(1.0, 0.1, 200_000, 3)
    assert b.std_err / a.std_err == pytest.approx(0.5, rel=0.1)
    again = model_a.f_short_time(1.0, 0.1, 50_000, 3, workers=3)
    assert again.value == a.value and again.std_err == a.std_err


def test_input_checks_and_short_time_warning():
    with pytest.raises(ValueError):
        model_a.f_short_time(1.0, 0.1, 99, 0)
    with pytest.raises(ValueError):
        model_a.f_short_time(0.0, 0.1, 1000, 0)
    with pytest.warns(UserWarning):
        r = model_a.f_short_time(1.0, 0.5, 1000, 0)
    assert not r.valid
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert model_a.f_short_time(1.0, 0.3, 1000, 0).valid


def test_small_x_asymptote():
    # the x^-2 law sets in once O(x) corrections die out, well below x = 0.01
    xs = np.array([1e-4, 3e-4, 1e-3])
    m, e, _ = model_a.short_time_expectation(xs, 200_000, 3)
    slope, err = model_a.loglog_slope(xs, m / xs ** 10, e / xs ** 10)
    assert slope == pytest.approx(-2.0, abs=0.05)


def test_large_x_asymptote():
    xs = np.geomspace(10.0, 100.0, 5)
    m, e, _ = model_a.short_time_expectation(xs, 200_000, 3)
    slope, _ = model_a.loglog_slope(xs, m / xs ** 10, e / xs ** 10)
    assert slope == pytest.approx(-10.0, abs=0.3)


# --- echo cumulant -----------------------------------------------------------------------

def run(tau_r, z=1.0, n=20_000):
    return model_a.ModelARun(xi_c=1.0, tau_c=1.0, z=z, tau_r=tau_r, tau_dp=0.5, n_samples=n, seed=5)


def test_gamma_negative_and_vanishes_at_short_echo():
    g = model_a.gamma4_model_a(run(0.2))
    assert g.value < 0 and g.valid
    tiny = model_a.gamma4_model_a(run(1e-4))
    assert abs(tiny.value) == pytest.approx(abs(g.value) * (1e-4 / 0.2) ** 4, rel=1e-12)


def test_prefactor_identity():
    r = run(0.1, z=2.0)
    g = model_a.gamma4_model_a(r)
    direct = (-(2.0 ** 10) / math.pi ** 3 * (r.tau_c / r.tau_dp) ** 4 / (r.xi_c / r.a) ** 2
              * r.s ** 4 / r.x ** 10 * g.f.expectation)
    assert model_a.PREFACTOR_C == 8.0 * 2.0 ** 10
    assert g.value == pytest.approx(direct, rel=1e-13)


def test_run_validation():
    with pytest.raises(ValueError):
        model_a.ModelARun(1.0, 1.0, -1.0, 0.1, 1.0, 1000)


def test_gamma_outside_short_time_flagged():
    assert not model_a.gamma4_model_a(run(0.5)).valid


# --- units ---------------------------------------------------------------------------------

def test_tau_dp_nanometre_scale():
    t = model_a.tau_dp(1e-9)
    assert 1e-9 / 3 <= t <= 3e-9
    # hbar a^3 / (muB^2 mu0) with CODATA 2022 values, evaluated in decimal arithmetic
    assert t == pytest.approx(9.75733398998404563e-10, rel=1e-10)
    assert model_a.tau_dp(2e-9) == pytest.approx(8.0 * t, rel=1e-14)
    assert model_a.tau_dp(1e-9, g=2.0, S=0.5) == pytest.approx(t, rel=1e-14)
    with pytest.raises(ValueError):
        model_a.tau_dp(0.0)


def test_loglog_slope_exact_power():
    x = np.geomspace(0.1, 10.0, 7)
    slope, err = model_a.loglog_slope(x, 3.0 * x ** -2.5, 0.01 * x ** -2.5)
    assert slope == pytest.approx(-2.5, rel=1e-12)
    assert err > 0
