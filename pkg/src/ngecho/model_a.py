"""Critical (Model A) magnetization noise: Ginzburg-Landau coefficients, Keldysh
propagators, the tree-level four-point vertex and the short-time estimate of
the fourth-order echo cumulant.

The short-time cumulant reduces to a six-dimensional momentum integral,

    F(x, s) = s^4 / (8 pi^3 x^10) E[ Q e^{-Q} / sum_{j=1..4}(1 + q_j^2/x^2) * prod_{j=1..3} 1/(1 + q_j^2/x^2) ],

where three planar momenta have radial law q^2 e^{-q} (Gamma(3, 1)) and
uniform angles, and Q = |q1 + q2 + q3| = q_4.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .streams import DEFAULT_CHUNK, map_chunks

__all__ = [
    "GLParams",
    "gl_from_ising",
    "gamma_q",
    "propagators",
    "tree_vertex",
    "tree_vertex_from_propagators",
    "radial_draws",
    "ShortTimeEstimate",
    "short_time_expectation",
    "f_short_time",
    "momentum_quadrature",
    "ModelARun",
    "ModelAGamma",
    "gamma4_model_a",
    "tau_dp",
    "loglog_slope",
    "SHORT_TIME_LIMIT",
    "PREFACTOR_C",
]

SHORT_TIME_LIMIT = 0.3
PREFACTOR_C = 2.0 ** 13
# exponential radial proposal below this x, Gamma(3, 1) above
PROPOSAL_SWITCH = 2.0

# CODATA 2022, SI
HBAR = 1.054571817e-34
MU0 = 1.25663706127e-6
MU_B = 9.2740100657e-24


@dataclass(frozen=True)
class GLParams:
    """Ginzburg-Landau coefficients of a nearest-neighbour Ising magnet on a square lattice."""

    J: float
    T: float
    a: float
    gamma_relax: float = 1.0
    S: float = 1.0

    def __post_init__(self):
        if not (self.J > 0 and self.a > 0 and self.gamma_relax > 0 and self.S > 0):
            raise ValueError("J, a, gamma_relax and S must be positive")
        if not self.T > self.T_C:
            raise ValueError("T must exceed T_C = 4J (disordered phase only)")

    @property
    def T_C(self) -> float:
        return 4.0 * self.J

    @property
    def K(self) -> float:
        return self.T_C / 8.0

    @property
    def r(self) -> float:
        return (self.T - self.T_C) / self.a ** 2

    @property
    def u(self) -> float:
        return self.T_C / (3.0 * self.a ** 2)

    @property
    def xi_c(self) -> float:
        return math.sqrt(self.K / self.r)

    @property
    def tau_c(self) -> float:
        """Relaxation time Gamma xi_c^2 / K of the q = 0 mode."""
        return self.gamma_relax * self.xi_c ** 2 / self.K

    @property
    def moment_density(self) -> float:
        """Magnetization density per unit order parameter, in Bohr magnetons per area."""
        return self.S / self.a ** 2


def gl_from_ising(J: float, T: float, a: float, gamma_relax: float = 1.0, S: float = 1.0) -> GLParams:
    return GLParams(J, T, a, gamma_relax, S)


def gamma_q(q, p: GLParams):
    q = np.asarray(q, dtype=float)
    return p.K * (q * q + p.xi_c ** -2)


def propagators(q, omega, p: GLParams):
    """Keldysh correlation D^K and response D^R at momentum magnitude q and frequency omega."""
    g = gamma_q(q, p)
    w = np.asarray(omega, dtype=float)
    dk = -2j * p.gamma_relax * p.T / (w * w * p.gamma_relax ** 2 + g * g)
    dr = 1.0 / (1j * w * p.gamma_relax - g)
    return dk, dr


def tree_vertex(qs, omegas, p: GLParams):
    """Tree-level connected four-point function (momentum delta stripped)."""
    g = [gamma_q(q, p) for q in qs]
    den = 1.0
    for w, gj in zip(omegas, g):
        den = den * (np.asarray(w) ** 2 * p.gamma_relax ** 2 + gj * gj)
    return -6.0 * p.u * (2.0 * p.gamma_relax * p.T) ** 3 * sum(g) / den


def tree_vertex_from_propagators(qs, omegas, p: GLParams):
    """Same vertex assembled from -6 i u sum_j D^R(q_j) prod_{k != j} D^K(q_k)."""
    props = [propagators(q, w, p) for q, w in zip(qs, omegas)]
    total = 0.0
    for j in range(4):
        term = props[j][1]
        for k in range(4):
            if k != j:
                term = term * props[k][0]
        total = total + term
    return -6j * p.u * total


def radial_draws(n: int, rng: np.random.Generator, proposal: str = "gamma") -> np.ndarray:
    """(n, 3) radial momenta: Gamma(3, 1) as a sum of three unit exponentials, or plain Exp(1)."""
    if proposal == "gamma":
        return rng.exponential(size=(n, 3, 3)).sum(axis=-1)
    if proposal == "exp":
        return rng.exponential(size=(n, 3))
    raise ValueError("proposal must be 'gamma' or 'exp'")


def _integrand(q: np.ndarray, big_q: np.ndarray, x: float, proposal: str) -> np.ndarray:
    """Importance-weighted integrand whose mean under ``proposal`` is E[...]."""
    x2 = x * x
    q2 = q * q
    denom = 4.0 + (q2.sum(axis=1) + big_q * big_q) / x2
    base = big_q * np.exp(-big_q) / denom
    if proposal == "gamma":
        return base * np.prod(x2 / (x2 + q2), axis=1)
    # density e^{-q} instead of q^2 e^{-q} / 2: weight q^2 / 2 per momentum
    return base * np.prod(0.5 * x2 * q2 / (x2 + q2), axis=1)


def _choose(x: float, proposal: str) -> str:
    if proposal == "auto":
        return "exp" if x < PROPOSAL_SWITCH else "gamma"
    return proposal


@dataclass(frozen=True)
class ShortTimeEstimate:
    x: float
    s: float
    value: float
    std_err: float
    expectation: float
    expectation_err: float
    n_samples: int
    proposal: str
    valid: bool


def short_time_expectation(xs: Sequence[float], n_samples: int, seed: int, proposal: str = "auto",
                           workers: Optional[int] = None, chunk: int = DEFAULT_CHUNK):
    """Mean and standard error of the momentum expectation at every x.

    All x sharing a proposal use the same momentum samples, so ratios across
    x carry correlated (largely cancelling) noise.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if np.any(xs <= 0):
        raise ValueError("x must be positive")
    props = [_choose(x, proposal) for x in xs]
    mean = np.empty(xs.size)
    err = np.empty(xs.size)
    for stream, prop in enumerate(("gamma", "exp")):
        idx = [i for i, p in enumerate(props) if p == prop]
        if not idx:
            continue
        sel = xs[idx]

        def work(rng, size, _):
            q = radial_draws(size, rng, prop)
            th = rng.uniform(0.0, 2.0 * math.pi, size=(size, 3))
            big_q = np.hypot((q * np.cos(th)).sum(axis=1), (q * np.sin(th)).sum(axis=1))
            v = np.stack([_integrand(q, big_q, x, prop) for x in sel])
            return v.sum(axis=1), (v * v).sum(axis=1)

        parts = map_chunks(work, n_samples, seed, workers, chunk, stream)
        s1 = sum(p[0] for p in parts)
        s2 = sum(p[1] for p in parts)
        m = s1 / n_samples
        var = np.maximum(s2 / n_samples - m * m, 0.0) * n_samples / (n_samples - 1)
        mean[idx] = m
        err[idx] = np.sqrt(var / n_samples)
    return mean, err, props


def f_short_time(x: float, s: float, n_samples: int, seed: int, proposal: str = "gamma",
                 workers: Optional[int] = None) -> ShortTimeEstimate:
    """Importance-sampling estimate of F(x, s) in the short-echo regime."""
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    if not (x > 0 and s > 0):
        raise ValueError("x and s must be positive")
    valid = s <= SHORT_TIME_LIMIT
    if not valid:
        warnings.warn(f"s = {s} exceeds the short-time limit {SHORT_TIME_LIMIT}", stacklevel=2)
    m, e, props = short_time_expectation([x], n_samples, seed, proposal, workers)
    pref = s ** 4 / (8.0 * math.pi ** 3 * x ** 10)
    return ShortTimeEstimate(x, s, pref * m[0], pref * e[0], float(m[0]), float(e[0]), n_samples, props[0], valid)


def momentum_quadrature(x: float, nodes: int = 12, q_max: float = 12.0) -> float:
    """Brute-force oracle for the momentum expectation: 6D product Gauss-Legendre.

    Radial nodes on [0, q_max] (the neglected Gamma(3, 1) tail is below
    3 * 0.5 * Gamma(3, q_max) / Gamma(3), about 1.3e-3 relative at 12), angles
    on [0, 2 pi).
    """
    t, w = np.polynomial.legendre.leggauss(nodes)
    q = 0.5 * q_max * (t + 1.0)
    wq = 0.5 * q_max * w * q * q * np.exp(-q) / 2.0
    a = math.pi * (t + 1.0)
    wa = math.pi * w / (2.0 * math.pi)
    total = 0.0
    x2 = x * x
    ca, sa = np.cos(a), np.sin(a)
    for i1 in range(nodes):
        for k1 in range(nodes):
            qx1 = q[i1] * ca[k1]
            qy1 = q[i1] * sa[k1]
            # remaining axes: (q2, a2, q3, a3)
            qx = qx1 + (q[:, None] * ca[None, :])[:, :, None, None] + (q[:, None] * ca[None, :])[None, None]
            qy = qy1 + (q[:, None] * sa[None, :])[:, :, None, None] + (q[:, None] * sa[None, :])[None, None]
            big_q = np.hypot(qx, qy)
            q2sum = q[i1] ** 2 + (q ** 2)[:, None, None, None] + (q ** 2)[None, None, :, None]
            val = big_q * np.exp(-big_q) / (4.0 + (q2sum + big_q ** 2) / x2)
            r = x2 / (x2 + q * q)
            val = val * r[:, None, None, None] * r[None, None, :, None] * (x2 / (x2 + q[i1] ** 2))
            total += wq[i1] * wa[k1] * np.einsum("ijkl,i,j,k,l->", val, wq, wa, wq, wa)
    return float(total)


@dataclass(frozen=True)
class ModelARun:
    """Sensor height ``z`` and echo time ``tau_r`` against critical scales, plus sampling controls."""

    xi_c: float
    tau_c: float
    z: float
    tau_r: float
    tau_dp: float
    n_samples: int
    seed: int = 0
    a: float = 1.0

    def __post_init__(self):
        for name in ("xi_c", "tau_c", "z", "tau_r", "tau_dp", "n_samples", "a"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def x(self) -> float:
        return self.z / self.xi_c

    @property
    def s(self) -> float:
        return self.tau_r / self.tau_c


@dataclass(frozen=True)
class ModelAGamma:
    value: float
    std_err: float
    f: ShortTimeEstimate
    valid: bool


def _prefactor_gl(run: ModelARun) -> float:
    return PREFACTOR_C * (run.tau_c / run.tau_dp) ** 4 / (run.xi_c / run.a) ** 2


def gamma4_model_a(run: ModelARun, p: Optional[GLParams] = None, proposal: str = "auto",
                   workers: Optional[int] = None) -> ModelAGamma:
    """Fourth-order echo cumulant of the critical bath, cross-checked between prefactor forms."""
    if p is not None:
        run = ModelARun(run.xi_c, run.tau_c, run.z, run.tau_r, run.tau_dp, run.n_samples, run.seed, p.a)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        f = f_short_time(run.x, run.s, max(run.n_samples, 100), run.seed, proposal, workers)
    value = -_prefactor_gl(run) * f.value
    direct = (-(2.0 ** 10) / math.pi ** 3 / (run.xi_c / run.a) ** 2 * (run.tau_c / run.tau_dp) ** 4
              * run.s ** 4 / run.x ** 10 * f.expectation)
    if not math.isclose(value, direct, rel_tol=1e-12, abs_tol=0.0):
        raise AssertionError("prefactor forms disagree")
    return ModelAGamma(value, _prefactor_gl(run) * f.std_err, f, f.valid)


def tau_dp(a: float, g: float = 1.0, S: float = 1.0) -> float:
    """Dipole coupling time hbar a^3 / (g S muB^2 mu0) in seconds, ``a`` in metres."""
    if not (a > 0 and g > 0 and S > 0):
        raise ValueError("a, g and S must be positive")
    return HBAR * a ** 3 / (g * S * MU_B ** 2 * MU0)


def loglog_slope(x, y, y_err=None):
    """Weighted least-squares slope of log|y| against log x, with its standard error."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.abs(np.asarray(y, dtype=float)))
    if y_err is None:
        w = np.ones_like(lx)
    else:
        rel = np.abs(np.asarray(y_err, dtype=float) / np.asarray(y, dtype=float))
        w = 1.0 / np.maximum(rel, 1e-300) ** 2
    xm = np.sum(w * lx) / np.sum(w)
    ym = np.sum(w * ly) / np.sum(w)
    sxx = np.sum(w * (lx - xm) ** 2)
    slope = np.sum(w * (lx - xm) * (ly - ym)) / sxx
    err = math.sqrt(1.0 / sxx) if y_err is not None else math.nan
    return float(slope), float(err)
