import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from ngecho import dipole, tls, twoqubit
from ngecho.streams import chunk_rng
from ngecho.twoqubit import PAULI

phase = st.floats(-2 * math.pi, 2 * math.pi)


def kron(a, b):
    return np.kron(PAULI[a], PAULI[b])


# --- gates and states -------------------------------------------------------------

def test_gates_unitary():
    for u in twoqubit.gates():
        assert np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= 1e-14


def test_bell_states():
    g = twoqubit.gates()
    ket = np.array([1, 0, 0, 0], dtype=complex)
    phi = np.array([1, 0, 0, 1]) / math.sqrt(2)
    psi = 1j * np.array([0, 1, 1, 0]) / math.sqrt(2)
    assert abs(np.vdot(phi, g.u_phi @ ket)) == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(g.u_psi @ ket, psi, atol=1e-15)


def test_y_half_squared_flips():
    g = twoqubit.gates()
    out = g.y_half @ g.y_half @ np.array([1, 0], dtype=complex)
    assert abs(out[1]) == pytest.approx(1.0, abs=1e-15)


def test_state_validation():
    with pytest.raises(ValueError):
        twoqubit.TwoQubitState(np.eye(3) / 3)
    with pytest.raises(ValueError):
        twoqubit.TwoQubitState(np.eye(4))
    bad = np.diag([1.5, -0.5, 0, 0]).astype(complex)
    with pytest.raises(ValueError):
        twoqubit.TwoQubitState(bad)
    m = np.zeros((4, 4), complex)
    m[0, 0] = 1.0
    m[0, 1] = 0.1j
    with pytest.raises(ValueError):
        twoqubit.TwoQubitState(m)


def test_dephase_identity_and_flip():
    plus = np.array([1, 1]) / math.sqrt(2)
    s = twoqubit.TwoQubitState.pure(np.kron(plus, plus))
    assert np.array_equal(twoqubit.dephase(s, 0.0, 0.0).rho, s.rho)
    x1 = kron("x", "i")
    flipped = twoqubit.dephase(s, math.pi, 0.0)
    assert flipped.expect(x1) == pytest.approx(-s.expect(x1), abs=1e-15)
    assert flipped.expect(kron("i", "x")) == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=100)
@given(phase, phase, st.integers(0, 10_000))
def test_dephase_matches_state_vector(x1, x2, seed):
    rng = chunk_rng(seed, 0)
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    # exp(i sigma_z x / 2) on each qubit
    r1 = np.diag(np.exp(0.5j * x1 * np.array([1, -1])))
    r2 = np.diag(np.exp(0.5j * x2 * np.array([1, -1])))
    out = np.kron(r1, r2) @ psi
    ref = np.outer(out, out.conj())
    got = twoqubit.dephase(twoqubit.TwoQubitState.pure(psi), x1, x2).rho
    assert np.max(np.abs(got - ref)) <= 1e-14
    assert abs(np.trace(got) - 1.0) <= 1e-14


# --- protocols on deterministic phases -----------------------------------------------

@pytest.mark.parametrize("protocol", [twoqubit.protocol_coincidence, twoqubit.protocol_entangled])
def test_zero_phase_readout(protocol):
    r = protocol(None, 1.0, 4, 0, phases=np.zeros((4, 2)))
    for v in r.expectations.values():
        assert v == pytest.approx(1.0, abs=1e-14)
    assert r.gamma12.value == pytest.approx(0.0, abs=1e-14)


def test_coincidence_zero_phase_pauli_values():
    r = twoqubit.protocol_coincidence(None, 1.0, 2, 0, phases=np.zeros((2, 2)))
    rho = r.rho["plus"]
    assert rho.expect(kron("z", "z")) == pytest.approx(1.0, abs=1e-14)
    assert rho.expect(kron("y", "y")) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("protocol", [twoqubit.protocol_coincidence, twoqubit.protocol_entangled])
def test_deterministic_phase_identities(protocol):
    x = np.tile([0.3, 0.5], (3, 1))
    e = protocol(None, 1.0, 3, 0, phases=x).expectations
    assert e["x1"] == pytest.approx(math.cos(0.3), abs=1e-14)
    assert e["x2"] == pytest.approx(math.cos(0.5), abs=1e-14)
    assert e["plus"] == pytest.approx(math.cos(0.8), abs=1e-14)
    assert e["minus"] == pytest.approx(math.cos(-0.2), abs=1e-14)


def test_swapping_bell_preparations_swaps_outputs():
    g = twoqubit.gates()
    z1 = kron("z", "i")
    x1, x2 = 0.4, -1.1
    d = np.exp(1j * twoqubit.phase_diagonal(x1, x2))
    m = np.outer(d, d.conj())
    phi = float(np.real(np.sum(twoqubit._kernel(g.u_phi, z1) * m)))
    psi = float(np.real(np.sum(twoqubit._kernel(g.u_psi, z1) * m)))
    assert phi == pytest.approx(math.cos(x1 + x2), abs=1e-14)
    assert psi == pytest.approx(math.cos(x1 - x2), abs=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_averaging_commutes_with_measurement(seed):
    x = chunk_rng(seed, 0).normal(size=(64, 2))
    for protocol in (twoqubit.protocol_coincidence, twoqubit.protocol_entangled):
        r = protocol(None, 1.0, 64, 0, phases=x)
        _, specs = twoqubit._protocol_specs("coincidence" if protocol is twoqubit.protocol_coincidence
                                            else "entangled")
        for name, _, op in specs:
            assert r.rho[name].expect(op) == pytest.approx(r.expectations[name], abs=1e-12)


def test_odd_correlators_vanish_for_symmetric_phases():
    x = chunk_rng(5, 0).normal(size=(50, 2))
    x = np.vstack((x, -x))
    r = twoqubit.protocol_coincidence(None, 1.0, x.shape[0], 0, phases=x)
    g = twoqubit.gates()
    prep = g.u1 @ g.u2
    before = r.rho["plus"].evolve(prep)
    assert before.expect(kron("y", "z")) == pytest.approx(0.0, abs=1e-14)
    assert before.expect(kron("z", "y")) == pytest.approx(0.0, abs=1e-14)


# --- protocols on a telegraph bath -------------------------------------------------

def small_bath(sep=0.0, seed=3):
    rng = chunk_rng(seed, 0)
    g1 = dipole.SensorGeometry(1.0)
    g2 = dipole.SensorGeometry(1.0, offset=np.array([sep, 0.0, 0.0]))
    ens = dipole.sample_ensemble(0.5, g1, 2.0 + sep, rng, rate=1.0, center=(0.5 * sep, 0.0))
    b = twoqubit.TwoQubitBath.from_geometry(ens, g1, g2)
    scale = 0.2 / np.abs(b.couplings).max()
    return twoqubit.TwoQubitBath(b.couplings * scale, b.rates), ens, g1, g2


def test_bath_couplings_follow_geometry():
    b, ens, g1, g2 = small_bath(sep=1.0)
    raw = twoqubit.TwoQubitBath.from_geometry(ens, g1, g2)
    np.testing.assert_allclose(raw.couplings[0], dipole.couplings(ens, g1))
    np.testing.assert_allclose(raw.couplings[1], dipole.couplings(ens, g2))
    with pytest.raises(ValueError):
        twoqubit.TwoQubitBath(np.ones(3), 1.0)


def test_protocols_identical_on_shared_trajectories():
    b, *_ = small_bath()
    rc = twoqubit.protocol_coincidence(b, 1.0, 20_000, 11)
    re_ = twoqubit.protocol_entangled(b, 1.0, 20_000, 11)
    for a, c in ((rc.c1, re_.c1), (rc.c2, re_.c2), (rc.c_plus, re_.c_plus), (rc.c_minus, re_.c_minus)):
        assert abs(a.value - c.value) <= 1e-12
    assert rc.gamma12.value == pytest.approx(re_.gamma12.value, abs=1e-12)


def test_protocols_agree_on_independent_trajectories():
    b, *_ = small_bath(seed=4)
    rc = twoqubit.protocol_coincidence(b, 1.0, 200_000, 1)
    re_ = twoqubit.protocol_entangled(b, 1.0, 200_000, 2)
    d = rc.gamma12.value - re_.gamma12.value
    assert abs(d) <= 3.0 * math.hypot(rc.gamma12.std_err, re_.gamma12.std_err)


def test_colocated_matches_single_qubit_quartic():
    rng = chunk_rng(8, 0)
    v = rng.normal(size=4)
    v *= 0.1 / np.abs(v).max()
    b = twoqubit.TwoQubitBath(np.vstack((v, v)), 1.0)
    r = twoqubit.protocol_coincidence(b, 1.0, 400_000, 8)
    target = tls.gamma12_quartic(v, v, 1.0, 1.0)
    assert r.gamma12.status == "ok"
    assert abs(r.gamma12.value - target) <= 3.0 * r.gamma12.std_err


def test_shot_noise_option():
    b, *_ = small_bath()
    exact = twoqubit.protocol_coincidence(b, 1.0, 5_000, 2)
    noisy = twoqubit.protocol_coincidence(b, 1.0, 5_000, 2, shots=10 ** 7)
    again = twoqubit.protocol_coincidence(b, 1.0, 5_000, 2, shots=10 ** 7)
    for k in exact.expectations:
        # at most four Pauli terms, each with binomial sd <= 1 / sqrt(shots)
        assert noisy.expectations[k] == pytest.approx(exact.expectations[k], abs=4 * 5 / math.sqrt(1e7))
        assert noisy.expectations[k] == again.expectations[k]


def test_rejects_tiny_n():
    with pytest.raises(ValueError):
        twoqubit.protocol_coincidence(small_bath()[0], 1.0, 1, 0)


# --- separation dependence ------------------------------------------------------------

def overlap_kernel(sep, h=1.0):
    """Plane average of V1^2 V2^2 over isotropic moments (unit density and scale)."""

    def w(r, axis):
        rr = np.linalg.norm(r)
        return (3.0 * r * r[2] - axis * rr * rr) / rr ** 5

    e_z = np.array([0.0, 0.0, 1.0])

    def f(y, x):
        a = w(np.array([x, y, -h]), e_z)
        b = w(np.array([x - sep, y, -h]), e_z)
        return (a @ a * (b @ b) + 2.0 * (a @ b) ** 2) / 15.0

    lim = 12.0 + sep
    return integrate.dblquad(f, -lim, lim + sep, -lim, lim, epsrel=1e-7)[0]


def test_overlap_kernel_monte_carlo():
    rng = chunk_rng(12, 0)
    g1 = dipole.SensorGeometry(1.0)
    g2 = dipole.SensorGeometry(1.0, offset=np.array([1.0, 0.0, 0.0]))
    vals = []
    for _ in range(3000):
        ens = dipole.sample_ensemble(1.0, g1, 6.0, rng, center=(0.5, 0.0))
        vals.append(np.sum(dipole.couplings(ens, g1) ** 2 * dipole.couplings(ens, g2) ** 2))
    vals = np.array(vals)
    assert abs(vals.mean() - overlap_kernel(1.0)) <= 3.0 * vals.std() / math.sqrt(vals.size) + 1e-3


def test_gamma12_non_increasing_with_separation():
    seps = [0.0, 0.5, 1.0, 2.0, 4.0]
    k = [overlap_kernel(s) for s in seps]
    assert all(b <= a * (1 + 1e-6) for a, b in zip(k, k[1:]))
    assert k[-1] < 0.05 * k[0]
