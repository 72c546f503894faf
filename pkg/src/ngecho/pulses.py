"""Echo sequences as signed weights, phase accumulation and cumulant estimation.

A sequence is a contiguous list of (t_start, t_end, polarity) segments. Baths
return exact integrals of their field over the intervals between breakpoints,
so phases for every sequence sharing the same trajectories are exact linear
combinations of those integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .streams import DEFAULT_CHUNK, map_chunks

__all__ = [
    "PulseSequence",
    "SequenceSet",
    "SampleSet",
    "CumulantEstimate",
    "GammaEstimate",
    "make_sequences",
    "accumulate_phase",
    "union_breaks",
    "weight_matrix",
    "sample_phases",
    "estimate_cumulants",
    "estimate_cumulant",
    "gamma_diagnostic",
    "apply_t1",
    "estimate_gamma",
]

FAMILIES = ("ramsey", "hahn")


@dataclass(frozen=True)
class PulseSequence:
    segments: Tuple[Tuple[float, float, int], ...]
    label: str = ""

    def __post_init__(self):
        segs = tuple((float(a), float(b), int(p)) for a, b, p in self.segments)
        if not segs:
            raise ValueError("a sequence needs at least one segment")
        for (a, b, p), nxt in zip(segs, segs[1:] + (None,)):
            if not b > a or p not in (1, -1):
                raise ValueError("segments need t_end > t_start and polarity +-1")
            if nxt is not None and nxt[0] != b:
                raise ValueError("segments must be contiguous")
        object.__setattr__(self, "segments", segs)

    @property
    def support(self) -> Tuple[float, float]:
        return self.segments[0][0], self.segments[-1][1]

    @property
    def duration(self) -> float:
        a, b = self.support
        return b - a

    @property
    def breaks(self) -> np.ndarray:
        return np.array([s[0] for s in self.segments] + [self.segments[-1][1]])

    def weight(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for a, b, p in self.segments:
            out = np.where((t >= a) & (t < b), p, out)
        return out

    def integral(self) -> float:
        return float(sum(p * (b - a) for a, b, p in self.segments))


class SequenceSet(NamedTuple):
    x1: PulseSequence
    x2: PulseSequence
    plus: PulseSequence
    minus: PulseSequence


def _negate(segs):
    return [(a, b, -p) for a, b, p in segs]


def make_sequences(tau1: float, tau2: float, family: str = "ramsey") -> SequenceSet:
    """The four sequences measuring X1, X2, X2 + X1 and X2 - X1.

    X1 lives on [-tau1, 0] and X2 on [0, tau2]. In the ``hahn`` family each
    window is itself echoed at its midpoint, making every sequence compensated.
    """
    if not (tau1 > 0 and tau2 > 0):
        raise ValueError("echo times must be positive")
    if family not in FAMILIES:
        raise ValueError(f"family must be one of {FAMILIES}")
    if family == "ramsey":
        s1 = [(-tau1, 0.0, 1)]
        s2 = [(0.0, tau2, 1)]
    else:
        s1 = [(-tau1, -tau1 / 2.0, -1), (-tau1 / 2.0, 0.0, 1)]
        s2 = [(0.0, tau2 / 2.0, -1), (tau2 / 2.0, tau2, 1)]
    return SequenceSet(
        PulseSequence(tuple(s1), f"X1/{family}"),
        PulseSequence(tuple(s2), f"X2/{family}"),
        PulseSequence(tuple(s1 + s2), f"X1plusX2/{family}"),
        PulseSequence(tuple(_negate(s1) + s2), f"X1minusX2/{family}"),
    )


def accumulate_phase(seq: PulseSequence, paths, couplings) -> float:
    """X = sum_j V_j int w(t) sigma_j(t) dt for explicit telegraph paths."""
    a, b = seq.support
    total = 0.0
    for path, v in zip(paths, couplings):
        t0, t1 = path.window
        if t0 > a or t1 < b:
            raise ValueError("path window does not cover the sequence support")
        total += v * sum(p * path.integral(s, e) for s, e, p in seq.segments)
    return float(total)


def union_breaks(seqs: Sequence[PulseSequence]) -> np.ndarray:
    return np.unique(np.concatenate([s.breaks for s in seqs]))


def weight_matrix(seqs: Sequence[PulseSequence], breaks: np.ndarray) -> np.ndarray:
    """(len(breaks) - 1, S) weights of each sequence on each union interval."""
    mids = 0.5 * (breaks[:-1] + breaks[1:])
    return np.column_stack([s.weight(mids) for s in seqs])


def sample_phases(seqs: Sequence[PulseSequence], bath, n: int, rng: np.random.Generator) -> np.ndarray:
    """Phases of every sequence on ``n`` shared bath trajectories; shape (n, C, S)."""
    br = union_breaks(seqs)
    ints = bath.interval_integrals(br, n, rng)
    return ints @ weight_matrix(seqs, br)


@dataclass(frozen=True)
class SampleSet:
    """Per-chunk sums of cos X for S sequences evaluated on common trajectories."""

    block_sums: np.ndarray      # (B, S)
    block_counts: np.ndarray    # (B,)
    cross: np.ndarray           # (S, S) sum over samples of cos X_k cos X_l

    @property
    def n(self) -> int:
        return int(self.block_counts.sum())


@dataclass(frozen=True)
class CumulantEstimate:
    """C = log <cos X> (plus any deterministic ``offset``) with a delta-method error.

    ``mean_cos`` is the bath average of cos X before any offset.
    """

    value: float
    std_err: float
    n_samples: int
    mean_cos: float
    offset: float = 0.0
    sample_set: Optional[SampleSet] = None
    index: int = 0

    @property
    def status(self) -> str:
        return "ok" if self.mean_cos > 0 else "coherence-lost"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @classmethod
    def from_sums(cls, total: float, total_sq: float, n: int, sample_set=None, index=0):
        if n < 2:
            raise ValueError("need at least two samples")
        m = total / n
        var = max(total_sq / n - m * m, 0.0) * n / (n - 1)
        if m > 0:
            return cls(math.log(m), math.sqrt(var / n) / m, n, m, 0.0, sample_set, index)
        return cls(math.nan, math.nan, n, m, 0.0, sample_set, index)

    @classmethod
    def from_samples(cls, cos_values) -> "CumulantEstimate":
        c = np.asarray(cos_values, dtype=float)
        return cls.from_sums(float(c.sum()), float(c @ c), c.size)


@dataclass(frozen=True)
class GammaEstimate:
    value: float
    std_err: float
    status: str = "ok"
    method: str = ""


def estimate_cumulants(seqs: Sequence[PulseSequence], bath, n_samples: int, seed: int,
                       workers: Optional[int] = None, chunk: int = DEFAULT_CHUNK,
                       channel: int = 0, stream: int = 0) -> List[CumulantEstimate]:
    """Estimate log <cos X> for several sequences on common bath trajectories."""
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")

    def work(rng, size, _):
        c = np.cos(sample_phases(seqs, bath, size, rng)[:, channel, :])
        return c.sum(axis=0), c.T @ c, size

    parts = map_chunks(work, n_samples, seed, workers, chunk, stream)
    sums = np.array([p[0] for p in parts])
    counts = np.array([p[2] for p in parts])
    cross = np.zeros((len(seqs), len(seqs)))
    for p in parts:
        cross += p[1]
    ss = SampleSet(sums, counts, cross)
    total = sums.sum(axis=0)
    return [CumulantEstimate.from_sums(float(total[k]), float(cross[k, k]), n_samples, ss, k)
            for k in range(len(seqs))]


def estimate_cumulant(seq: PulseSequence, bath, n_samples: int, seed: int, **kw) -> CumulantEstimate:
    return estimate_cumulants([seq], bath, n_samples, seed, **kw)[0]


def _combination(means: np.ndarray, coeffs: np.ndarray) -> float:
    return float(coeffs @ np.log(means))


def _jackknife(ss: SampleSet, idx, coeffs) -> float:
    """Delete-a-block jackknife standard error for unequal block sizes.

    Deterministic offsets (T1 shifts) do not move the error and are left out
    to avoid cancellation.
    """
    sums = ss.block_sums[:, idx]
    counts = ss.block_counts.astype(float)
    n = counts.sum()
    total = sums.sum(axis=0)
    theta = _combination(total / n, coeffs)
    loo = np.array([_combination((total - sums[b]) / (n - counts[b]), coeffs)
                    for b in range(counts.size)])
    h = n / counts
    nb = counts.size
    pseudo_mean = nb * theta - np.sum((1.0 - counts / n) * loo)
    pv = h * theta - (h - 1.0) * loo
    var = np.sum((pv - pseudo_mean) ** 2 / (h - 1.0)) / nb
    return math.sqrt(max(var, 0.0))


def _delta_shared(ss: SampleSet, idx, means, coeffs) -> float:
    """Delta-method error using the empirical covariance of the shared cos samples."""
    n = ss.n
    cov = (ss.cross[np.ix_(idx, idx)] / n - np.outer(means, means)) * n / (n - 1)
    g = coeffs / means
    return math.sqrt(max(g @ cov @ g, 0.0) / n)


def gamma_diagnostic(c1: CumulantEstimate, c2: CumulantEstimate, c_plus: CumulantEstimate,
                     c_minus: CumulantEstimate, min_blocks: int = 8) -> GammaEstimate:
    """Gamma = C(X2+X1) + C(X2-X1) - 2 C(X2) - 2 C(X1) with an honest error.

    Cumulants drawn from one sample set get a block jackknife (or, with too few
    blocks, the delta method on the empirical covariance); otherwise errors
    are combined as independent.
    """
    cs = (c_plus, c_minus, c1, c2)
    coeffs = np.array([1.0, 1.0, -2.0, -2.0])
    if not all(c.ok for c in cs):
        return GammaEstimate(math.nan, math.nan, "undefined", "")
    value = float(coeffs @ np.array([c.value for c in cs]))
    ss = c1.sample_set
    shared = ss is not None and all(c.sample_set is ss for c in cs)
    if shared:
        idx = [c.index for c in cs]
        if ss.block_counts.size >= min_blocks:
            return GammaEstimate(value, _jackknife(ss, idx, coeffs), "ok", "jackknife")
        means = np.array([c.mean_cos for c in cs])
        return GammaEstimate(value, _delta_shared(ss, idx, means, coeffs), "ok", "delta-shared")
    err = math.sqrt(sum((k * c.std_err) ** 2 for k, c in zip(coeffs, cs)))
    return GammaEstimate(value, err, "ok", "independent")


def apply_t1(c: CumulantEstimate, duration: float, t1: float) -> CumulantEstimate:
    """Add the energy-relaxation decay -duration / (2 T1) to a cumulant."""
    if not t1 > 0:
        raise ValueError("t1 must be positive")
    if math.isinf(t1):
        return c
    shift = -duration / (2.0 * t1)
    return replace(c, value=c.value + shift, offset=c.offset + shift)


def estimate_gamma(tau1: float, tau2: float, bath, n_samples: int, seed: int, family: str = "ramsey",
                   **kw):
    """Run all four sequences on common trajectories; returns (GammaEstimate, SequenceSet-ordered cumulants)."""
    seqs = make_sequences(tau1, tau2, family)
    c = estimate_cumulants(list(seqs), bath, n_samples, seed, **kw)
    cums = SequenceSet(*c)
    return gamma_diagnostic(cums.x1, cums.x2, cums.plus, cums.minus), cums
