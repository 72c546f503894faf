"""Dipolar coupling of bath spins to a sensing qubit and planar ensemble averages.

All magnetic prefactors (mu0 g muB mu / 4 pi) are grouped into one
``moment_scale`` so that couplings come out directly in frequency units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import integrate

from .bath import Fluctuator

__all__ = [
    "SensorGeometry",
    "coupling",
    "couplings",
    "angular_f2",
    "angular_f4",
    "planar_v2",
    "planar_v4",
    "planar_moment",
    "planar_truncation_bound",
    "random_directions",
    "sample_ensemble",
]

E_Z = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class SensorGeometry:
    """Qubit at ``offset`` (relative to the reference qubit) a ``height`` above the spin plane."""

    height: float
    quant_axis: np.ndarray = field(default_factory=lambda: E_Z.copy())
    moment_scale: float = 1.0
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not self.height > 0:
            raise ValueError("height must be positive")
        n = np.asarray(self.quant_axis, dtype=float).reshape(3)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError("quant_axis must be a unit vector")
        object.__setattr__(self, "quant_axis", n)
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=float).reshape(3))


def _dipole(r: np.ndarray, mu: np.ndarray, n: np.ndarray) -> np.ndarray:
    """(3 (R.n)(R.mu) - R^2 (mu.n)) / R^5 for row-stacked R and mu."""
    r2 = np.einsum("...i,...i->...", r, r)
    return (3.0 * (r @ n) * np.einsum("...i,...i->...", r, mu) - r2 * (mu @ n)) / r2 ** 2.5


def coupling(fluct: Fluctuator, geom: SensorGeometry) -> float:
    """Coupling V of one fluctuator to the qubit described by ``geom``."""
    r = fluct.position - geom.offset
    if not np.linalg.norm(r) > 0:
        raise ValueError("fluctuator coincides with the qubit")
    return float(geom.moment_scale * fluct.moment_mag * _dipole(r, fluct.moment_dir, geom.quant_axis))


def couplings(ensemble: List[Fluctuator], geom: SensorGeometry) -> np.ndarray:
    if not ensemble:
        return np.empty(0)
    pos = np.array([f.position for f in ensemble]) - geom.offset
    mu = np.array([f.moment_dir for f in ensemble])
    mag = np.array([f.moment_mag for f in ensemble])
    if np.any(np.linalg.norm(pos, axis=1) == 0):
        raise ValueError("fluctuator coincides with the qubit")
    return geom.moment_scale * mag * _dipole(pos, mu, geom.quant_axis)


def _check_cos(c):
    c = np.asarray(c, dtype=float)
    if np.any(np.abs(c) > 1):
        raise ValueError("cos_theta must lie in [-1, 1]")
    return c


def angular_f2(cos_theta):
    """Direction average of (3 cos(a) cos(b) - cos(c))^2 with R at polar angle theta."""
    c = _check_cos(cos_theta)
    return (3.0 * c * c + 1.0) / 3.0


def angular_f4(cos_theta):
    c = _check_cos(cos_theta)
    return (3.0 * c * c + 1.0) ** 2 / 5.0


def planar_v2(n2d: float, geom: SensorGeometry) -> float:
    """Sum of V^2 over a uniform plane of density n2d, averaged over moment directions (axis e_z)."""
    return math.pi * n2d * geom.moment_scale ** 2 / (2.0 * geom.height ** 4)


def planar_v4(n2d: float, geom: SensorGeometry) -> float:
    return 87.0 * math.pi * n2d * geom.moment_scale ** 4 / (175.0 * geom.height ** 10)


def _directional_moment(c: np.ndarray, cn: float, sn: float, cphi: np.ndarray, order: int):
    """Average over moment directions of (R-hat contraction)^order for unit R-hat.

    With w = 3 (R.n) R - n, the projection is w.mu and |w|^2 = 3 (R.n)^2 + 1.
    """
    rn = c * cn + np.sqrt(np.clip(1.0 - c * c, 0.0, None)) * sn * cphi
    w2 = 3.0 * rn * rn + 1.0
    return w2 / 3.0 if order == 2 else w2 * w2 / 5.0


def planar_moment(n2d: float, geom: SensorGeometry, order: int, r_max: Optional[float] = None) -> float:
    """Numerical planar average of V^order (order 2 or 4) for any quantization axis.

    Integrates over the disc of radius ``r_max`` (whole plane if None) with
    the moment direction averaged analytically.
    """
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    h = geom.height
    n = geom.quant_axis
    cn = float(n[2])
    sn = float(math.hypot(n[0], n[1]))
    p = 3 * order

    def radial(rho, phi):
        d = math.hypot(rho, h)
        # R points from the qubit down to the plane: R_z = -h
        c = -h / d
        return rho * _directional_moment(np.array(c), cn, sn, np.array(math.cos(phi)), order) / d ** p

    upper = np.inf if r_max is None else r_max
    val, _ = integrate.dblquad(lambda rho, phi: radial(rho, phi), 0.0, 2.0 * math.pi, 0.0, upper,
                               epsabs=0, epsrel=1e-11)
    return n2d * geom.moment_scale ** order * float(val)


def planar_truncation_bound(n2d: float, geom: SensorGeometry, order: int, r_max: float) -> float:
    """Upper bound on the planar V^order mass beyond radius r_max (F <= 16/5 for order 4, 4/3 for order 2)."""
    p = 3 * order
    fmax = 4.0 / 3.0 if order == 2 else 16.0 / 5.0
    return 2.0 * math.pi * n2d * geom.moment_scale ** order * fmax * r_max ** (2 - p) / (p - 2)


def random_directions(n: int, rng: np.random.Generator) -> np.ndarray:
    """Isotropic unit vectors (normalized Gaussian triples)."""
    v = rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v


def sample_ensemble(n2d: float, geom: SensorGeometry, r_max: Optional[float], rng: np.random.Generator,
                    rate: float = 0.0, center=(0.0, 0.0)) -> List[Fluctuator]:
    """Poisson-many spins, uniform in the disc of radius r_max (default 30 h), isotropic moments.

    Positions are displacements from the reference qubit, which sits a height h
    above the plane point ``center``.
    """
    if r_max is None:
        r_max = 30.0 * geom.height
    if r_max <= 0:
        raise ValueError("r_max must be positive")
    count = int(rng.poisson(n2d * math.pi * r_max * r_max))
    rho = r_max * np.sqrt(rng.uniform(size=count))
    phi = rng.uniform(0.0, 2.0 * math.pi, size=count)
    pos = np.column_stack((center[0] + rho * np.cos(phi), center[1] + rho * np.sin(phi),
                           np.full(count, -geom.height)))
    mu = random_directions(count, rng)
    return [Fluctuator(p, m, 1.0, rate) for p, m in zip(pos, mu)]
