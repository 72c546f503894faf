"""Classical noise sources: random telegraph fluctuators and Ornstein-Uhlenbeck noise.

Telegraph paths are sampled event by event (exponential waiting times), so
integrals of a path against piecewise-constant weights are exact. The OU
sampler draws the field and its interval integrals jointly from the exact
Gaussian transition, so phases accumulated on the grid are also exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
from scipy.linalg import expm

__all__ = [
    "Fluctuator",
    "TelegraphPath",
    "TelegraphBatch",
    "OuPath",
    "TelegraphBath",
    "OuBath",
    "sample_telegraph",
    "sample_telegraph_batch",
    "sample_ou",
    "sample_ou_batch",
    "g2",
    "g4_ordered",
    "x_moments",
    "equal_window_moments",
    "telegraph_characteristic",
]


@dataclass(frozen=True)
class Fluctuator:
    """A bath spin: displacement from the (reference) qubit, moment and switching rate."""

    position: np.ndarray
    moment_dir: np.ndarray
    moment_mag: float = 1.0
    rate: float = 0.0

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        mu = np.asarray(self.moment_dir, dtype=float).reshape(3)
        if abs(np.linalg.norm(mu) - 1.0) > 1e-12:
            raise ValueError("moment_dir must be a unit vector")
        if self.rate < 0 or self.moment_mag < 0:
            raise ValueError("rate and moment_mag must be non-negative")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "moment_dir", mu)


@dataclass(frozen=True)
class TelegraphPath:
    """One telegraph trajectory sigma(t) = +-1 on ``window``."""

    switch_times: np.ndarray
    initial_state: int
    window: Tuple[float, float]

    def __post_init__(self):
        st = np.asarray(self.switch_times, dtype=float)
        t0, t1 = self.window
        if self.initial_state not in (1, -1):
            raise ValueError("initial_state must be +1 or -1")
        if st.size and (np.any(np.diff(st) <= 0) or st[0] < t0 or st[-1] > t1):
            raise ValueError("switch times must be strictly increasing inside the window")
        object.__setattr__(self, "switch_times", st)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.switch_times, t, side="right")
        return self.initial_state * np.where(k % 2 == 0, 1, -1)

    def integral(self, a: float, b: float) -> float:
        """Exact integral of sigma over [a, b] (a <= b, inside the window)."""
        t0, t1 = self.window
        if a < t0 or b > t1 or a > b:
            raise ValueError(f"interval [{a}, {b}] outside path window {self.window}")
        edges = np.concatenate(([a], self.switch_times[(self.switch_times > a) & (self.switch_times < b)], [b]))
        k0 = np.searchsorted(self.switch_times, a, side="right")
        signs = np.where((k0 + np.arange(edges.size - 1)) % 2 == 0, 1.0, -1.0)
        return float(self.initial_state * np.sum(signs * np.diff(edges)))


@dataclass(frozen=True)
class TelegraphBatch:
    """Many independent telegraph paths sharing one window.

    ``switches`` is (n, m), row-sorted; unused slots hold the window end,
    which contributes zero-length segments and never changes an integral.
    """

    initial: np.ndarray
    switches: np.ndarray
    window: Tuple[float, float]

    def __len__(self):
        return self.initial.shape[0]

    def path(self, i: int) -> TelegraphPath:
        t1 = self.window[1]
        st = self.switches[i]
        return TelegraphPath(st[st < t1], int(self.initial[i]), self.window)

    def values(self, t: float) -> np.ndarray:
        # padding slots sit exactly at the window end and are not switches
        k = np.count_nonzero((self.switches <= t) & (self.switches < self.window[1]), axis=1)
        return self.initial * np.where(k % 2 == 0, 1, -1)

    def cumulative(self, breaks: Sequence[float]) -> np.ndarray:
        """S(b) = integral of sigma from the window start to each b; shape (n, len(breaks))."""
        t0, _ = self.window
        n, m = self.switches.shape
        init = self.initial.astype(float)
        breaks = np.asarray(breaks, dtype=float)
        if m == 0:
            return init[:, None] * (breaks[None, :] - t0)
        ext = np.empty((n, m + 1))
        ext[:, 0] = t0
        ext[:, 1:] = self.switches
        alt = np.where(np.arange(m) % 2 == 0, 1.0, -1.0)
        pref = np.zeros((n, m + 1))
        np.cumsum(alt * np.diff(ext, axis=1), axis=1, out=pref[:, 1:])
        rows = np.arange(n)
        out = np.empty((n, breaks.size))
        for j, b in enumerate(breaks):
            k = np.count_nonzero(self.switches <= b, axis=1)
            sign = np.where(k % 2 == 0, 1.0, -1.0)
            out[:, j] = init * (pref[rows, k] + sign * (b - ext[rows, k]))
        return out

    def interval_integrals(self, breaks: Sequence[float]) -> np.ndarray:
        """Integrals over consecutive break intervals; shape (n, len(breaks) - 1)."""
        t0, t1 = self.window
        if breaks[0] < t0 - 1e-12 or breaks[-1] > t1 + 1e-12:
            raise ValueError("breaks extend beyond the path window")
        if self.switches.shape[1] == 0:
            # frozen paths: exact interval lengths, so echoed static fields cancel bit for bit
            return self.initial.astype(float)[:, None] * np.diff(np.asarray(breaks, dtype=float))[None, :]
        return np.diff(self.cumulative(breaks), axis=1)


def sample_telegraph_batch(rate: float, window: Tuple[float, float], n: int,
                           rng: np.random.Generator) -> TelegraphBatch:
    """Sample ``n`` stationary telegraph paths with flip rate ``rate``.

    Initial states are +-1 with probability 1/2; waiting times between flips
    are exponential with mean 1/rate.
    """
    t0, t1 = float(window[0]), float(window[1])
    if not t1 > t0:
        raise ValueError("window must be non-degenerate")
    if rate < 0:
        raise ValueError("rate must be non-negative")
    initial = (2 * rng.integers(0, 2, size=n) - 1).astype(np.int8)
    if rate == 0 or n == 0:
        return TelegraphBatch(initial, np.empty((n, 0)), (t0, t1))
    lam = rate * (t1 - t0)
    m = int(math.ceil(lam + 6.0 * math.sqrt(lam) + 8.0))
    times = t0 + np.cumsum(rng.exponential(1.0 / rate, size=(n, m)), axis=1)
    short = np.flatnonzero(times[:, -1] <= t1)
    while short.size:
        more = times[short, -1:] + np.cumsum(rng.exponential(1.0 / rate, size=(short.size, m)), axis=1)
        pad = np.full((n, m), np.inf)
        pad[short] = more
        times = np.concatenate((times, pad), axis=1)
        short = short[more[:, -1] <= t1]
    kmax = int(np.count_nonzero(times < t1, axis=1).max())
    switches = np.minimum(times[:, :kmax], t1)
    return TelegraphBatch(initial, switches, (t0, t1))


def sample_telegraph(rate: float, window: Tuple[float, float], rng: np.random.Generator) -> TelegraphPath:
    return sample_telegraph_batch(rate, window, 1, rng).path(0)


def g2(rate, t1, t2):
    """Telegraph autocorrelation exp(-2 rate |t1 - t2|)."""
    return np.exp(-2.0 * np.asarray(rate) * np.abs(np.asarray(t1) - np.asarray(t2)))


def g4_ordered(rate, t1, t2, t3, t4):
    """Four-time telegraph correlator for t1 <= t2 <= t3 <= t4."""
    t = np.stack(np.broadcast_arrays(*map(np.asarray, (t1, t2, t3, t4))))
    if np.any(np.diff(t, axis=0) < 0):
        raise ValueError("times must be sorted t1 <= t2 <= t3 <= t4")
    return g2(rate, t[3], t[2]) * g2(rate, t[1], t[0])


def _one_minus_exp(x):
    return -np.expm1(-x)


def x_moments(rate: float, tau1: float, tau2: float):
    """(<X1^2>, <X2^2>, <X1 X2>) for X1 = int_{-tau1}^0 sigma, X2 = int_0^{tau2} sigma.

    Self-moments follow from integrating g2 directly:
    <X^2> = tau/rate - (1 - exp(-2 rate tau)) / (2 rate^2).
    """

    def self_moment(tau):
        y = 2.0 * rate * tau
        if y < 1e-4:
            # tau^2 (1 - y/3 + y^2/12 - y^3/60)
            return tau * tau * (1.0 - y / 3.0 + y * y / 12.0 - y ** 3 / 60.0)
        return tau / rate - _one_minus_exp(y) / (2.0 * rate * rate)

    def half(tau):
        # (1 - exp(-2 rate tau)) / (2 rate)
        y = 2.0 * rate * tau
        if y < 1e-8:
            return tau * (1.0 - y / 2.0)
        return _one_minus_exp(y) / (2.0 * rate)

    return self_moment(tau1), self_moment(tau2), half(tau1) * half(tau2)


def equal_window_moments(rate: float, tau: float):
    """(<X^2>, kappa_4) of X = integral of sigma over one window of length tau."""
    a = 2.0 * rate
    y = a * tau
    x2 = x_moments(rate, tau, tau)[0]
    if y < 1e-2:
        k4 = tau ** 4 * (-2.0 + 8.0 * y / 5.0 - 11.0 * y * y / 15.0 + 26.0 * y ** 3 / 105.0)
    else:
        e = math.exp(-y)
        k4 = (60.0 - 24.0 * y - 48.0 * y * e - 48.0 * e - 12.0 * e * e) / a ** 4
    return x2, k4


def telegraph_characteristic(rate: float, coupling: float, breaks: Sequence[float],
                             weights: Sequence[float]) -> complex:
    """Exact <exp(-i V int w sigma)> for one stationary telegraph fluctuator.

    Propagates the joint law of (sigma, accumulated phase factor) through
    each piecewise-constant weight interval with a matrix exponential.
    """
    p = np.array([0.5, 0.5], dtype=complex)
    for (a, b), w in zip(zip(breaks[:-1], breaks[1:]), weights):
        gen = np.array([[-rate - 1j * coupling * w, rate],
                        [rate, -rate + 1j * coupling * w]], dtype=complex)
        p = expm(gen * (b - a)) @ p
    return complex(p.sum())


@dataclass(frozen=True)
class OuPath:
    """OU samples on a grid plus the exact integral over each grid interval."""

    times: np.ndarray
    values: np.ndarray
    integrals: np.ndarray = field(default_factory=lambda: np.empty(0))


def _ou_integral_variance(h: float, tau_c: float) -> float:
    """Var of int_0^h of a zero-started OU with unit stationary variance."""
    x = h / tau_c
    if x < 1e-2:
        f = x ** 3 / 3.0 - x ** 4 / 4.0 + 7.0 * x ** 5 / 60.0 - x ** 6 / 24.0
    else:
        f = x + 2.0 * math.expm1(-x) - 0.5 * math.expm1(-2.0 * x)
    return 2.0 * tau_c * tau_c * f


def sample_ou_batch(t2: float, tau_c: float, grid: Sequence[float], n: int,
                    rng: np.random.Generator):
    """Stationary OU with covariance exp(-|dt|/tau_c) / (t2 tau_c) on ``grid``.

    Returns ``(values, integrals)`` of shapes (n, len(grid)) and (n, len(grid) - 1).
    """
    if tau_c <= 0 or t2 <= 0:
        raise ValueError("t2 and tau_c must be positive")
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted")
    sd = 1.0 / math.sqrt(t2 * tau_c)
    values = np.empty((n, grid.size))
    integrals = np.empty((n, max(grid.size - 1, 0)))
    values[:, 0] = rng.standard_normal(n)
    for k, h in enumerate(np.diff(grid)):
        a = math.exp(-h / tau_c)
        var_v = -math.expm1(-2.0 * h / tau_c)
        var_i = _ou_integral_variance(h, tau_c)
        cov = tau_c * (1.0 - a) ** 2
        z = rng.standard_normal((n, 2))
        # Cholesky of [[var_v, cov], [cov, var_i]]
        l11 = math.sqrt(var_v)
        l21 = cov / l11 if l11 > 0 else 0.0
        l22 = math.sqrt(max(var_i - l21 * l21, 0.0))
        prev = values[:, k]
        values[:, k + 1] = a * prev + l11 * z[:, 0]
        integrals[:, k] = tau_c * (1.0 - a) * prev + l21 * z[:, 0] + l22 * z[:, 1]
    return values * sd, integrals * sd


def sample_ou(t2: float, tau_c: float, grid: Sequence[float], rng: np.random.Generator) -> OuPath:
    values, integrals = sample_ou_batch(t2, tau_c, grid, 1, rng)
    return OuPath(np.asarray(grid, dtype=float), values[0], integrals[0])


class TelegraphBath:
    """Independent telegraph fluctuators seen through one or more coupling channels.

    ``couplings`` has shape (N,) for one qubit or (C, N) for C qubits sharing
    the same fluctuators; ``rates`` is a scalar or shape (N,).
    """

    def __init__(self, couplings, rates):
        v = np.atleast_2d(np.asarray(couplings, dtype=float))
        self.couplings = v
        self.rates = np.broadcast_to(np.asarray(rates, dtype=float), (v.shape[1],)).copy()
        if np.any(self.rates < 0):
            raise ValueError("rates must be non-negative")

    @property
    def n_fluctuators(self) -> int:
        return self.couplings.shape[1]

    def interval_integrals(self, breaks, n: int, rng: np.random.Generator) -> np.ndarray:
        """Integrals of each channel's field over the break intervals; (n, C, nb - 1)."""
        breaks = np.asarray(breaks, dtype=float)
        window = (breaks[0], breaks[-1])
        out = np.zeros((n, self.couplings.shape[0], breaks.size - 1))
        for rate in np.unique(self.rates):
            idx = np.flatnonzero(self.rates == rate)
            batch = sample_telegraph_batch(float(rate), window, n * idx.size, rng)
            ints = batch.interval_integrals(breaks).reshape(n, idx.size, -1)
            out += np.einsum("cj,njk->nck", self.couplings[:, idx], ints)
        return out


class OuBath:
    """Gaussian reference bath: OU field of correlation exp(-|dt|/tau_c)/(t2 tau_c), times ``scale``."""

    def __init__(self, t2: float, tau_c: float, scale: float = 1.0):
        if t2 <= 0 or tau_c <= 0:
            raise ValueError("t2 and tau_c must be positive")
        self.t2, self.tau_c, self.scale = float(t2), float(tau_c), float(scale)

    def interval_integrals(self, breaks, n: int, rng: np.random.Generator) -> np.ndarray:
        _, ints = sample_ou_batch(self.t2, self.tau_c, breaks, n, rng)
        return (self.scale * ints)[:, None, :]
