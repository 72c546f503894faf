"""Fourth-order filter functions and their contraction with noise polyspectra.

Polyspectrum convention: the connected four-point function of the field is
kappa(t1..t4) = int prod(dw_j / 2pi) exp(-i sum w_j t_j) 2 pi delta(sum w) Lambda(w),
so Gamma = 1/2 int dw1 dw2 dw3 / (2 pi)^3 Lambda(w1, w2, w3, -w1-w2-w3) W(w; tau).
"""

from __future__ import annotations

import itertools
from typing import Callable, Tuple

import numpy as np

__all__ = [
    "w4_ramsey",
    "w4_hahn",
    "gamma_from_polyspectrum",
    "lorentzian_polyspectrum",
    "telegraph_polyspectrum",
    "SERIES_CUTOFF",
]

SERIES_CUTOFF = 1e-4
_PAIRS = tuple(itertools.combinations(range(4), 2))


def _ramsey_factor(w, tau):
    """(2/w) sin(w tau / 2), the Fourier weight of a flat window of length tau."""
    x = w * tau
    small = np.abs(x) < SERIES_CUTOFF
    safe = np.where(small, 1.0, w)
    exact = 2.0 / safe * np.sin(safe * tau / 2.0)
    return np.where(small, tau * (1.0 - x * x / 24.0), exact)


def _hahn_factor(w, tau):
    """(4/w) sin^2(w tau / 4), the Fourier weight of a window echoed at its midpoint."""
    x = w * tau
    small = np.abs(x) < SERIES_CUTOFF
    safe = np.where(small, 1.0, w)
    exact = 4.0 / safe * np.sin(safe * tau / 4.0) ** 2
    return np.where(small, w * tau * tau / 4.0 * (1.0 - x * x / 48.0), exact)


def _w4(freqs, tau, factor):
    w = [np.asarray(f, dtype=float) for f in freqs]
    if len(w) != 4:
        raise ValueError("need four frequencies")
    cos_avg = sum(np.cos((w[j] + w[k]) * tau) for j, k in _PAIRS) / 6.0
    return cos_avg * factor(w[0], tau) * factor(w[1], tau) * factor(w[2], tau) * factor(w[3], tau)


def w4_ramsey(freqs, tau_r: float):
    """Fourth-order filter of the Ramsey-family sequences; ``freqs`` is (w1, w2, w3, w4)."""
    return _w4(freqs, tau_r, _ramsey_factor)


def w4_hahn(freqs, tau_r: float):
    """Fourth-order filter of the compensated Hahn-family sequences."""
    return _w4(freqs, tau_r, _hahn_factor)


def gamma_from_polyspectrum(poly: Callable, family: str, tau_r: float, extent: float, points: int,
                            slab: int = 16) -> Tuple[float, float]:
    """Trapezoid contraction of ``poly(w1, w2, w3, w4)`` with the filter on [-extent, extent]^3.

    Returns ``(gamma, err)`` where ``err`` is the difference to the same rule on
    the stride-2 subgrid (``points`` is rounded up to odd).
    """
    wfun = {"ramsey": w4_ramsey, "hahn": w4_hahn}[family]
    points = int(points) | 1
    axis = np.linspace(-extent, extent, points)
    h = axis[1] - axis[0]
    tw = np.full(points, h)
    tw[[0, -1]] *= 0.5
    sub = np.zeros(points)
    sub[::2] = 2.0 * h
    sub[[0, -1]] = h
    w2, w3 = np.meshgrid(axis, axis, indexing="ij")
    wt23 = tw[:, None] * tw[None, :]
    sub23 = sub[:, None] * sub[None, :]
    full = coarse = 0.0
    for start in range(0, points, slab):
        w1 = axis[start:start + slab, None, None]
        quad = (w1, w2[None], w3[None], -(w1 + w2[None] + w3[None]))
        lam = np.real(poly(*quad))
        if not np.all(np.isfinite(lam)):
            raise ValueError("polyspectrum returned non-finite values")
        val = lam * wfun(quad, tau_r)
        full += np.einsum("i,ijk,jk->", tw[start:start + slab], val, wt23)
        coarse += np.einsum("i,ijk,jk->", sub[start:start + slab], val, sub23)
    norm = 0.5 / (2.0 * np.pi) ** 3
    return float(norm * full), float(norm * abs(full - coarse))


def lorentzian_polyspectrum(gamma: float):
    """Test polyspectrum prod_j 2 gamma / (w_j^2 + gamma^2).

    Its time-domain four-point function is int ds prod_j exp(-gamma |t_j - s|).
    """

    def poly(w1, w2, w3, w4):
        out = 1.0
        for w in (w1, w2, w3, w4):
            out = out * (2.0 * gamma / (w * w + gamma * gamma))
        return out

    return poly


def telegraph_polyspectrum(rate: float, coupling: float = 1.0):
    """Fourth-order polyspectrum of V sigma(t) for one stationary telegraph fluctuator.

    For sorted times the connected four-point function of sigma is
    -2 exp(-2 rate [(s3 + s4) - (s1 + s2)]); summing its transform over the
    24 time orderings gives Lambda.
    """
    a = 2.0 * rate
    v4 = coupling ** 4
    perms = tuple(itertools.permutations(range(4)))

    def poly(*w):
        total = 0.0
        for p in perms:
            o1, _, o3, o4 = (w[i] for i in p)
            total = total + 1.0 / ((a + 1j * o1) * (2.0 * a - 1j * (o3 + o4)) * (a - 1j * o4))
        return -2.0 * v4 * np.real(total)

    return poly
