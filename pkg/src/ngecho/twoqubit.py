"""Two-qubit echo protocols under a shared telegraph bath.

Both qubits dephase under fields from the same fluctuators, seen through
their own dipolar couplings. Bath averages are assembled into the averaged
density matrix and read out with exact expectation values (optionally
followed by binomial shot noise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from .bath import TelegraphBath
from .dipole import SensorGeometry, couplings as dipole_couplings
from .pulses import (CumulantEstimate, GammaEstimate, PulseSequence, SampleSet, gamma_diagnostic,
                     sample_phases)
from .streams import DEFAULT_CHUNK, chunk_rng, map_chunks

__all__ = [
    "Gates",
    "gates",
    "TwoQubitState",
    "TwoQubitBath",
    "TwoQubitResult",
    "dephase",
    "phase_diagonal",
    "PAULI",
    "protocol_coincidence",
    "protocol_entangled",
]

I2 = np.eye(2, dtype=complex)
PAULI = {
    "i": I2,
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
KET00 = np.array([1, 0, 0, 0], dtype=complex)


class Gates(NamedTuple):
    y_half: np.ndarray   # single-qubit pi/2 rotation about y
    x_pi: np.ndarray     # single-qubit i sigma_x
    cnot: np.ndarray     # control qubit 1, target qubit 2
    u1: np.ndarray
    u2: np.ndarray
    u_phi: np.ndarray
    u_psi: np.ndarray


def gates() -> Gates:
    y = (I2 - 1j * PAULI["y"]) / math.sqrt(2.0)
    xp = 1j * PAULI["x"]
    cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    u1 = np.kron(y, I2)
    u2 = np.kron(I2, y)
    u_phi = cnot @ u1
    u_psi = np.kron(xp, I2) @ u_phi
    return Gates(y, xp, cnot, u1, u2, u_phi, u_psi)


@dataclass(frozen=True)
class TwoQubitState:
    """Density matrix in the |00>, |01>, |10>, |11> basis."""

    rho: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rho, dtype=complex)
        if r.shape != (4, 4):
            raise ValueError("density matrix must be 4x4")
        if np.max(np.abs(r - r.conj().T)) > 1e-12:
            raise ValueError("density matrix must be Hermitian")
        if abs(np.trace(r) - 1.0) > 1e-12:
            raise ValueError("density matrix must have unit trace")
        if np.linalg.eigvalsh(r).min() < -1e-10:
            raise ValueError("density matrix must be positive semidefinite")
        object.__setattr__(self, "rho", r)

    @classmethod
    def pure(cls, psi) -> "TwoQubitState":
        psi = np.asarray(psi, dtype=complex)
        return cls(np.outer(psi, psi.conj()))

    def evolve(self, u: np.ndarray) -> "TwoQubitState":
        return TwoQubitState(u @ self.rho @ u.conj().T)

    def expect(self, op: np.ndarray) -> float:
        return float(np.real(np.trace(op @ self.rho)))


def phase_diagonal(x1, x2) -> np.ndarray:
    """Diagonal phases (rows of 4) of exp(i sigma_z x1 / 2) x exp(i sigma_z x2 / 2)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return 0.5 * np.stack((x1 + x2, x1 - x2, x2 - x1, -(x1 + x2)), axis=-1)


def dephase(state: TwoQubitState, x1: float, x2: float) -> TwoQubitState:
    d = np.exp(1j * phase_diagonal(x1, x2))
    return TwoQubitState(state.rho * np.outer(d, d.conj()))


class TwoQubitBath:
    """Telegraph fluctuators shared by two qubits; couplings has shape (2, N)."""

    def __init__(self, couplings, rates):
        c = np.asarray(couplings, dtype=float)
        if c.ndim != 2 or c.shape[0] != 2:
            raise ValueError("couplings must have shape (2, N)")
        self.telegraph = TelegraphBath(c, rates)

    @classmethod
    def from_geometry(cls, ensemble, geom1: SensorGeometry, geom2: SensorGeometry, rates=None):
        v = np.vstack((dipole_couplings(ensemble, geom1), dipole_couplings(ensemble, geom2)))
        if rates is None:
            rates = np.array([f.rate for f in ensemble])
        return cls(v, rates)

    @property
    def couplings(self) -> np.ndarray:
        return self.telegraph.couplings

    @property
    def rates(self) -> np.ndarray:
        return self.telegraph.rates

    def interval_integrals(self, breaks, n, rng):
        return self.telegraph.interval_integrals(breaks, n, rng)


@dataclass(frozen=True)
class TwoQubitResult:
    c1: CumulantEstimate
    c2: CumulantEstimate
    c_plus: CumulantEstimate
    c_minus: CumulantEstimate
    gamma12: GammaEstimate
    rho: Dict[str, TwoQubitState]
    expectations: Dict[str, float]


def _kernel(u: np.ndarray, op: np.ndarray) -> np.ndarray:
    """K with tr[op U^dag D rho D^dag U] = Re sum_ab K_ab exp(i(phi_a - phi_b)), rho = U|00><00|U^dag."""
    rho = np.outer(u @ KET00, (u @ KET00).conj())
    o = u @ op @ u.conj().T
    return o.T * rho


def _op(a: str, b: str) -> np.ndarray:
    return np.kron(PAULI[a], PAULI[b])


def _protocol_specs(kind: str):
    """(name, preparation, observable) for the four cumulants of each protocol."""
    g = gates()
    zz = _op("z", "z")
    yy = _op("y", "y")
    z1 = _op("z", "i")
    z2 = _op("i", "z")
    if kind == "coincidence":
        prep = g.u1 @ g.u2
        return prep, [("x1", prep, z1), ("x2", prep, z2), ("plus", prep, zz - yy), ("minus", prep, zz + yy)]
    return None, [("x1", g.u1, z1), ("x2", g.u2, z2), ("plus", g.u_phi, z1), ("minus", g.u_psi, z1)]


def _run(kind: str, bath, tau_r: float, n: int, seed: int, workers, chunk, shots, phases):
    if n < 2:
        raise ValueError("n must be at least 2")
    _, specs = _protocol_specs(kind)
    kernels = np.stack([_kernel(u, op) for _, u, op in specs])
    seq = PulseSequence(((0.0, float(tau_r), 1),), "window")

    def values(x):
        e = np.exp(1j * phase_diagonal(x[:, 0], x[:, 1]))
        m = e[:, :, None] * e[:, None, :].conj()
        return np.real(np.einsum("kab,nab->nk", kernels, m)), m.sum(axis=0)

    if phases is not None:
        x = np.asarray(phases, dtype=float)
        parts = [values(x[i:i + chunk]) + (min(chunk, x.shape[0] - i),) for i in range(0, x.shape[0], chunk)]
        n = x.shape[0]
    else:
        def work(rng, size, _):
            x = sample_phases([seq], bath, size, rng)[:, :, 0]
            return values(x) + (size,)
        parts = map_chunks(work, n, seed, workers, chunk)

    sums = np.array([p[0].sum(axis=0) for p in parts])
    cross = sum(p[0].T @ p[0] for p in parts)
    counts = np.array([p[2] for p in parts])
    m_bar = sum(p[1] for p in parts) / n
    ss = SampleSet(sums, counts, cross)
    exps = sums.sum(axis=0) / n
    if shots:
        rng = chunk_rng(seed, 0, stream=7)
        exps = _shot_noise(specs, m_bar, shots, rng)
    cums = []
    for k in range(len(specs)):
        c = CumulantEstimate.from_sums(exps[k] * n, float(cross[k, k]), n, ss, k)
        cums.append(c)
    rho = {}
    for name, u, _ in specs:
        prepared = np.outer(u @ KET00, (u @ KET00).conj())
        rho[name] = TwoQubitState(u.conj().T @ (prepared * m_bar) @ u)
    c1, c2, cp, cm = cums
    gam = gamma_diagnostic(c1, c2, cp, cm)
    return TwoQubitResult(c1, c2, cp, cm, gam, rho, {s[0]: float(v) for s, v in zip(specs, exps)})


def _shot_noise(specs, m_bar, shots, rng):
    """Finite-shot estimates of each observable, one binomial draw per Pauli term.

    Standard errors still describe the bath average only.
    """
    out = []
    for _, u, op in specs:
        terms = []
        for label, sign in _pauli_terms(op):
            kern = _kernel(u, _op(*label))
            e = float(np.real(np.sum(kern * m_bar)))
            p = min(max(0.5 * (1.0 + e), 0.0), 1.0)
            terms.append(sign * (2.0 * rng.binomial(shots, p) / shots - 1.0))
        out.append(sum(terms))
    return np.array(out)


def _pauli_terms(op):
    labels = [(a, b) for a in "ixyz" for b in "ixyz"]
    out = []
    for lab in labels:
        c = np.real(np.trace(_op(*lab) @ op)) / 4.0
        if abs(c) > 1e-12:
            out.append((lab, c))
    return out


def protocol_coincidence(bath, tau_r: float, n: int, seed: int, workers: Optional[int] = None,
                         chunk: int = DEFAULT_CHUNK, shots: Optional[int] = None, phases=None) -> TwoQubitResult:
    """Unentangled protocol: both qubits in |+>, read out single and coincidence observables.

    ``phases`` (n, 2) bypasses the bath and uses the given (X1, X2) samples.
    """
    return _run("coincidence", bath, tau_r, n, seed, workers, chunk, shots, phases)


def protocol_entangled(bath, tau_r: float, n: int, seed: int, workers: Optional[int] = None,
                       chunk: int = DEFAULT_CHUNK, shots: Optional[int] = None, phases=None) -> TwoQubitResult:
    """Bell-state protocol: U_phi / U_psi prepare, dephase, undo the gates, measure qubit 1."""
    return _run("entangled", bath, tau_r, n, seed, workers, chunk, shots, phases)
