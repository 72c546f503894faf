"""Closed-form predictions for baths of two-level telegraph fluctuators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np

from .bath import equal_window_moments, x_moments

__all__ = [
    "TlsModel",
    "gamma4_raw",
    "t2_of_h",
    "gamma4_normalized",
    "gamma4_normalized_from_ratios",
    "kubo_coherence",
    "fig5_grid",
    "gamma4_ensemble",
    "gamma12_quartic",
]

V4_COEFF = 87.0 / 175.0


@dataclass(frozen=True)
class TlsModel:
    """Planar spin density ``n2d``, qubit height ``h``, switching rate ``gamma`` and grouped moment ``prefactor``."""

    n2d: float
    h: float
    gamma: float
    prefactor: float = 1.0

    def __post_init__(self):
        for name in ("n2d", "h", "gamma", "prefactor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def tau_c(self) -> float:
        return 1.0 / (2.0 * self.gamma)


def _window_factor(tau, tau_c):
    """tau_c (1 - exp(-tau / tau_c)), the saturating cross-moment factor."""
    return -tau_c * np.expm1(-np.asarray(tau, dtype=float) / tau_c)


def gamma4_raw(m: TlsModel, tau1, tau2):
    """Planar-averaged fourth-order Gamma from the raw dipole moments."""
    v4 = V4_COEFF * math.pi * m.n2d * m.prefactor ** 4 / m.h ** 10
    return -v4 * _window_factor(tau1, m.tau_c) ** 2 * _window_factor(tau2, m.tau_c) ** 2


def t2_of_h(m: TlsModel) -> float:
    """Gaussian dephasing time from the long-time linear decay."""
    return 1.0 / (math.pi * m.n2d * m.prefactor ** 2 / (2.0 * m.h ** 4) * m.tau_c)


def gamma4_normalized_from_ratios(pi_n_h2, tc_over_t2, tau1_over_tc, tau2_over_tc):
    """Gamma in terms of pi n h^2, tau_c / T2 and echo times in units of tau_c."""
    return (-(174.0 / 175.0) * (2.0 / pi_n_h2) * tc_over_t2 ** 2
            * np.expm1(-np.asarray(tau1_over_tc, dtype=float)) ** 2
            * np.expm1(-np.asarray(tau2_over_tc, dtype=float)) ** 2)


def gamma4_normalized(m: TlsModel, tau1, tau2):
    """Same quantity as :func:`gamma4_raw`, expressed through T2(h)."""
    tc = m.tau_c
    return gamma4_normalized_from_ratios(math.pi * m.n2d * m.h ** 2, tc / t2_of_h(m),
                                         np.asarray(tau1) / tc, np.asarray(tau2) / tc)


def kubo_coherence(tau_r, t2: float, tau_c: float):
    """Log-coherence of a Ramsey echo under exponentially correlated Gaussian noise."""
    x = np.asarray(tau_r, dtype=float) / tau_c
    small = x < 1e-3
    core = np.where(small, x * x / 2.0 - x ** 3 / 6.0 + x ** 4 / 24.0, x + np.expm1(-x))
    return -(tau_c / t2) * core


def fig5_grid(tau_grid: Sequence[float], ratios=(2.0, 0.4), pi_n_h2: float = 1.0) -> Dict[float, np.ndarray]:
    """Gamma(tau1, tau2) on a square grid of echo times in units of T2, one table per tau_c / T2."""
    t = np.asarray(tau_grid, dtype=float)
    out = {}
    for r in ratios:
        out[r] = gamma4_normalized_from_ratios(pi_n_h2, r, t[:, None] / r, t[None, :] / r)
    return out


def gamma4_ensemble(couplings, rate: float, tau1: float, tau2: float) -> float:
    """Quartic Gamma for a fixed set of couplings: -sum V^4 <X1 X2>^2."""
    v = np.asarray(couplings, dtype=float)
    cross = x_moments(rate, tau1, tau2)[2]
    return float(-np.sum(v ** 4) * cross ** 2)


def gamma12_quartic(v1, v2, rate: float, tau: float) -> float:
    """Quartic two-qubit Gamma for shared fluctuators over one window: (1/2) sum V1^2 V2^2 kappa4."""
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    _, k4 = equal_window_moments(rate, tau)
    return float(0.5 * np.sum(v1 * v1 * v2 * v2) * k4)
