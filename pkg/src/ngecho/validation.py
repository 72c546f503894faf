"""Oracle checks behind ``ngecho validate`` and the acceptance tests.

Each check returns a :class:`CheckResult`; ``quick=True`` shrinks sample
budgets (same tolerances, less statistical power) to fit in about a minute.
"""

from __future__ import annotations

import contextlib
import io
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import bath, dipole, filters, model_a, pulses, tls, twoqubit
from .streams import chunk_rng, map_chunks

__all__ = ["CheckResult", "CRITERIA", "run_criterion", "run_all", "ramsey_window_oracle", "hahn_window_oracle",
           "time_domain_w4", "telegraph_gamma_exact"]


@dataclass
class CheckResult:
    criterion: int
    name: str
    passed: bool
    details: List[str] = field(default_factory=list)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.criterion:2d}: {self.name}"


def _within(est: float, err: float, target: float, nsig: float = 3.0) -> bool:
    return abs(est - target) <= nsig * err


# 1 -------------------------------------------------------------------------

def check_correlators(quick: bool = False, seed: int = 1001) -> CheckResult:
    rate = 0.5
    n = 200_000 if quick else 1_000_000
    lags = np.array([0.25, 0.5, 1.0, 1.5, 2.0])
    quads = np.array([[0.0, 0.1, 0.3, 0.6], [0.0, 0.5, 0.7, 1.5], [0.0, 1.0, 2.0, 3.0],
                      [0.2, 0.4, 1.4, 2.9], [0.0, 0.0, 1.0, 1.0]])
    times = np.unique(np.concatenate(([0.0], lags, quads.ravel())))
    pos = {t: i for i, t in enumerate(times)}

    def work(rng, size, _):
        b = bath.sample_telegraph_batch(rate, (0.0, 4.0), size, rng)
        vals = np.column_stack([b.values(t) for t in times]).astype(float)
        p2 = vals[:, [0]] * vals[:, [pos[t] for t in lags]]
        p4 = np.column_stack([np.prod(vals[:, [pos[t] for t in q]], axis=1) for q in quads])
        prods = np.hstack((p2, p4))
        return prods.sum(axis=0), (prods * prods).sum(axis=0)

    parts = map_chunks(work, n, seed)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / n
    se = np.sqrt(np.maximum(s2 / n - mean ** 2, 0.0) / (n - 1))
    target = np.concatenate((bath.g2(rate, 0.0, lags), [bath.g4_ordered(rate, *q) for q in quads]))
    ok = np.abs(mean - target) <= 3.0 * np.maximum(se, 1e-15)
    res = CheckResult(1, "telegraph g2/g4 vs closed forms (3 sigma)", bool(ok.all()))
    labels = [f"g2 lag {t}" for t in lags] + [f"g4 {tuple(q.tolist())}" for q in quads]
    for lab, m, s, t in zip(labels, mean, se, target):
        res.details.append(f"{lab}: {m:.5f} +- {s:.5f} vs {t:.5f}")
    return res


# 2 -------------------------------------------------------------------------

def check_kubo(quick: bool = False, seed: int = 202) -> CheckResult:
    t2, tau_c = 1.0, 1.0
    n = 50_000 if quick else 200_000
    ou = bath.OuBath(t2, tau_c)
    ratios = np.geomspace(0.1, 5.0, 8)
    res = CheckResult(2, "OU Ramsey vs Kubo lineshape (3 sigma)", True)
    for k, r in enumerate(ratios):
        seq = pulses.PulseSequence(((0.0, r * tau_c, 1),), "ramsey")
        c = pulses.estimate_cumulant(seq, ou, n, seed + k)
        target = float(tls.kubo_coherence(r * tau_c, t2, tau_c))
        ok = c.ok and _within(c.value, c.std_err, target)
        res.passed &= ok
        res.details.append(f"tau/tau_c={r:.3f}: {c.value:.5f} +- {c.std_err:.5f} vs {target:.5f}")
    return res


# 3 -------------------------------------------------------------------------

def check_gaussian_null(quick: bool = False, seed: int = 303) -> CheckResult:
    n = 50_000 if quick else 400_000
    res = CheckResult(3, "Gamma = 0 for the OU bath at three coupling scales (3 sigma)", True)
    for k, scale in enumerate((0.5, 1.0, 2.0)):
        ou = bath.OuBath(4.0, 0.5, scale)
        g, _ = pulses.estimate_gamma(1.0, 1.0, ou, n, seed)
        ok = g.status == "ok" and abs(g.value) <= 3.0 * g.std_err
        res.passed &= ok
        res.details.append(f"scale {scale}: Gamma = {g.value:.3e} +- {g.std_err:.3e} ({g.method})")
    return res


# 4 -------------------------------------------------------------------------

def weak_coupling_ensemble(seed: int, rate: float, tau_max: float, v_tau: float = 0.1, mean_count: float = 6.0,
                           r_max: float = 2.0):
    """A small planar telegraph ensemble scaled so that max |V| tau_max = v_tau."""
    rng = chunk_rng(seed, 0, stream=11)
    geom = dipole.SensorGeometry(1.0)
    n2d = mean_count / (math.pi * r_max ** 2)
    ens = dipole.sample_ensemble(n2d, geom, r_max, rng, rate=rate)
    v = dipole.couplings(ens, geom)
    scale = v_tau / (tau_max * np.abs(v).max())
    return ens, v * scale, dipole.SensorGeometry(1.0, moment_scale=scale), n2d


def telegraph_gamma_exact(couplings, rate: float, tau1: float, tau2: float, family: str = "ramsey") -> float:
    """Gamma from the master-equation characteristic function (all orders)."""
    seqs = pulses.make_sequences(tau1, tau2, family)

    def log_chi(seq):
        br = seq.breaks
        w = [p for _, _, p in seq.segments]
        return sum(math.log(bath.telegraph_characteristic(rate, v, br, w).real) for v in couplings)

    return log_chi(seqs.plus) + log_chi(seqs.minus) - 2.0 * log_chi(seqs.x1) - 2.0 * log_chi(seqs.x2)


def check_telegraph_gamma(quick: bool = False, seed: int = 404) -> CheckResult:
    rate = 1.0
    n = 100_000 if quick else 1_000_000
    times = (0.5, 1.0, 2.0)
    ens, v, geom, n2d = weak_coupling_ensemble(seed, rate, max(times))
    tb = bath.TelegraphBath(v, rate)
    res = CheckResult(4, "telegraph Gamma vs closed form at weak coupling (3 sigma, negative)", True)
    res.details.append(f"{v.size} fluctuators, max V tau = {np.abs(v).max() * max(times):.3f}")
    for i, t1 in enumerate(times):
        for j, t2 in enumerate(times):
            g, _ = pulses.estimate_gamma(t1, t2, tb, n, seed + 10 * i + j)
            target = tls.gamma4_ensemble(v, rate, t1, t2)
            exact = telegraph_gamma_exact(v, rate, t1, t2)
            ok = g.status == "ok" and g.value < 0 and _within(g.value, g.std_err, target)
            res.passed &= ok
            res.details.append(f"(g t1, g t2)=({t1},{t2}): {g.value:.4e} +- {g.std_err:.2e} vs {target:.4e}"
                               f" (all-order {exact:.4e})")
    return res


# 5 -------------------------------------------------------------------------

def check_angular_planar(quick: bool = False, seed: int = 505) -> CheckResult:
    n = 1_000_000
    rng = chunk_rng(seed, 0)
    mu = dipole.random_directions(n, rng)
    res = CheckResult(5, "F2/F4 direction averages (0.5%) and planar quadrature (1e-6)", True)
    for c in (1.0, 0.8, 1 / math.sqrt(3.0), 0.3, 0.0):
        r = np.array([math.sqrt(1 - c * c), 0.0, c])
        proj = 3.0 * c * (mu @ r) - mu[:, 2]
        f2 = np.mean(proj ** 2)
        f4 = np.mean(proj ** 4)
        e2 = abs(f2 / dipole.angular_f2(c) - 1)
        e4 = abs(f4 / dipole.angular_f4(c) - 1)
        res.passed &= e2 < 5e-3 and e4 < 5e-3
        res.details.append(f"cos={c:.3f}: F2 rel err {e2:.2e}, F4 rel err {e4:.2e}")
    for h in (1.0, 1.7):
        g = dipole.SensorGeometry(h)
        e2 = abs(dipole.planar_moment(1.0, g, 2) / (math.pi / 2 / h ** 4) - 1)
        e4 = abs(dipole.planar_moment(1.0, g, 4) / (87 * math.pi / 175 / h ** 10) - 1)
        res.passed &= e2 < 1e-6 and e4 < 1e-6
        res.details.append(f"h={h}: planar V2 rel err {e2:.1e}, V4 rel err {e4:.1e}")
    return res


# 6 -------------------------------------------------------------------------

def check_normalization(quick: bool = False, seed: int = 606) -> CheckResult:
    rng = chunk_rng(seed, 0)
    worst = 0.0
    for _ in range(100):
        m = tls.TlsModel(*np.exp(rng.uniform(-2, 2, 4)))
        t1, t2 = np.exp(rng.uniform(-3, 3, 2)) * m.tau_c
        a = tls.gamma4_raw(m, t1, t2)
        b = tls.gamma4_normalized(m, t1, t2)
        worst = max(worst, abs(a / b - 1))
    return CheckResult(6, "normalized == raw Gamma on 100 random sets (1e-12)", worst <= 1e-12,
                       [f"max relative difference {worst:.2e}"])


# 7 -------------------------------------------------------------------------

def check_fig5(quick: bool = False, seed: int = 707) -> CheckResult:
    grid = np.linspace(0.0, 10.0, 41)
    tables = tls.fig5_grid(grid)
    mono = all(np.all(np.diff(t, axis=0) <= 0) and np.all(np.diff(t, axis=1) <= 0) for t in tables.values())
    sat = tls.fig5_grid([np.inf])
    ratio = float(sat[2.0][0, 0] / sat[0.4][0, 0])
    ok = mono and abs(ratio - 25.0) <= 25.0 * 1e-10 and all(t[0, 0] == 0 for t in tables.values())
    return CheckResult(7, "normalized grid monotone, saturation ratio 25 (1e-10)", bool(ok),
                       [f"monotone={mono}", f"saturation ratio {ratio!r}"])


# 8 -------------------------------------------------------------------------

def check_t1(quick: bool = False, seed: int = 808) -> CheckResult:
    rng = chunk_rng(seed, 0)
    v = rng.normal(size=4) * 0.1
    tb = bath.TelegraphBath(v, 0.7)
    worst = 0.0
    for k, (t1, t2) in enumerate(((0.5, 1.0), (1.0, 1.0), (2.0, 0.3))):
        g, c = pulses.estimate_gamma(t1, t2, tb, 20_000, seed + k)
        for T1 in (0.1, 3.0, 1e4):
            dec = [pulses.apply_t1(c.x1, t1, T1), pulses.apply_t1(c.x2, t2, T1),
                   pulses.apply_t1(c.plus, t1 + t2, T1), pulses.apply_t1(c.minus, t1 + t2, T1)]
            gd = pulses.gamma_diagnostic(*dec)
            worst = max(worst, abs(gd.value - g.value), abs(gd.std_err - g.std_err))
    return CheckResult(8, "T1 decoration leaves Gamma unchanged (1e-12)", worst <= 1e-12,
                       [f"max |Gamma_T1 - Gamma| = {worst:.1e}"])


# 9 -------------------------------------------------------------------------

def _gl(a: float, b: float, n: int):
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * t + 0.5 * (a + b), 0.5 * (b - a) * w


def ramsey_window_oracle(tau: float, n: int = 40):
    """Nodes/weights for the two flat windows [-tau, 0] and [0, tau]."""
    return [_gl(-tau, 0.0, n), _gl(0.0, tau, n)]


def hahn_window_oracle(tau: float, n: int = 24):
    """Signed nodes/weights for the two midpoint-echoed windows."""
    out = []
    for a, b in ((-tau, 0.0), (0.0, tau)):
        m = 0.5 * (a + b)
        t1, w1 = _gl(a, m, n)
        t2, w2 = _gl(m, b, n)
        out.append((np.concatenate((t1, t2)), np.concatenate((-w1, w2))))
    return out


def time_domain_w4(freqs, tau: float, family: str) -> float:
    """Direct 4D quadrature of exp(-i sum w t) over the window pairs, averaged over the 6 pair assignments."""
    win = ramsey_window_oracle(tau) if family == "ramsey" else hahn_window_oracle(tau)
    freqs = np.asarray(freqs, dtype=float)
    total = 0.0
    for j, k in ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)):
        rest = [i for i in range(4) if i not in (j, k)]
        order = [j, k] + rest
        (ta, wa), (tb, wb) = win
        nodes = [ta, ta, tb, tb]
        weights = [wa, wa, wb, wb]
        grids = np.meshgrid(*nodes, indexing="ij", sparse=True)
        phase = sum(freqs[o] * g for o, g in zip(order, grids))
        wgt = weights[0][:, None, None, None] * weights[1][None, :, None, None] \
            * weights[2][None, None, :, None] * weights[3][None, None, None, :]
        total += np.sum(wgt * np.exp(-1j * phase))
    return float(np.real(total) / 6.0)


def check_filters(quick: bool = False, seed: int = 909) -> CheckResult:
    rng = chunk_rng(seed, 0)
    tau = 1.3
    nq = 6 if quick else 20
    worst = {"ramsey": 0.0, "hahn": 0.0}
    for _ in range(nq):
        w = rng.uniform(-10.0, 10.0, 3) / tau
        quad = np.append(w, -w.sum())
        for fam, fn in (("ramsey", filters.w4_ramsey), ("hahn", filters.w4_hahn)):
            ref = time_domain_w4(quad, tau, fam)
            val = float(fn(quad, tau))
            worst[fam] = max(worst[fam], abs(val - ref) / abs(ref))
    w0 = float(filters.w4_ramsey(np.zeros(4), tau))
    hz = max(abs(float(filters.w4_hahn(np.array([eps, 1.0, 2.0, -3.0 - eps]), tau)))
             for eps in (0.0, 1e-9, 1e-12))
    ok = worst["ramsey"] <= 1e-6 and worst["hahn"] <= 1e-6 and abs(w0 - tau ** 4) <= 1e-14 * tau ** 4 and hz < 1e-8
    return CheckResult(9, "W4 filters vs time-domain quadrature (1e-6), limits", ok,
                       [f"max rel err ramsey {worst['ramsey']:.1e}, hahn {worst['hahn']:.1e}",
                        f"W_ramsey(0) = {w0!r} (tau^4 = {tau ** 4!r})", f"max |W_hahn| with one w -> 0: {hz:.1e}"])


# 10 ------------------------------------------------------------------------

def check_two_qubit(quick: bool = False, seed: int = 1010) -> CheckResult:
    rate, tau = 1.0, 1.0
    n = 100_000 if quick else 1_000_000
    res = CheckResult(10, "two-qubit protocols: equivalence, colocated and far-separated Gamma12", True)

    ens, v, geom, n2d = weak_coupling_ensemble(seed, rate, tau, v_tau=0.05)
    b = twoqubit.TwoQubitBath(np.vstack((v, v)), rate)
    rc = twoqubit.protocol_coincidence(b, tau, n, seed)
    re_ = twoqubit.protocol_entangled(b, tau, n, seed)
    diff = max(abs(a.value - c.value) for a, c in ((rc.c1, re_.c1), (rc.c2, re_.c2),
                                                    (rc.c_plus, re_.c_plus), (rc.c_minus, re_.c_minus)))
    res.passed &= diff <= 1e-12
    res.details.append(f"max cumulant difference on shared trajectories {diff:.1e}")

    target = tls.gamma12_quartic(v, v, rate, tau)
    g = rc.gamma12
    ok = g.status == "ok" and _within(g.value, g.std_err, target)
    res.passed &= ok
    res.details.append(f"colocated Gamma12 {g.value:.4e} +- {g.std_err:.1e} vs single-qubit {target:.4e}")

    # far apart: each qubit has its own dominant spins, 60 h apart
    rng = chunk_rng(seed, 1, stream=11)
    sep = 60.0
    g1 = dipole.SensorGeometry(1.0)
    g2 = dipole.SensorGeometry(1.0, offset=np.array([sep, 0.0, 0.0]))
    ens2 = (dipole.sample_ensemble(n2d, g1, 2.0, rng, rate=rate)
            + dipole.sample_ensemble(n2d, g2, 2.0, rng, rate=rate, center=(sep, 0.0)))
    vf = np.vstack((dipole.couplings(ens2, g1), dipole.couplings(ens2, g2)))
    vf *= 0.05 / (tau * np.abs(vf).max())
    bf = twoqubit.TwoQubitBath(vf, rate)
    rf = twoqubit.protocol_coincidence(bf, tau, n, seed + 1)
    pred = tls.gamma12_quartic(bf.couplings[0], bf.couplings[1], rate, tau)
    ok = rf.gamma12.status == "ok" and abs(rf.gamma12.value) <= 3.0 * rf.gamma12.std_err
    res.passed &= ok
    res.details.append(f"separated Gamma12 {rf.gamma12.value:.2e} +- {rf.gamma12.std_err:.1e}"
                       f" (quartic prediction {pred:.1e})")
    return res


# 11 ------------------------------------------------------------------------

FIG7_XI_OVER_A = 100.0
FIG7_TDP_OVER_TC = 1e-2


def fig7_gamma(xs, s_values, n: int, seed: int, proposal: str = "auto", workers=None):
    """|Gamma| grid over x and s with the reference sweep parameters (shared samples across x)."""
    m, e, props = model_a.short_time_expectation(xs, n, seed, proposal, workers)
    out = []
    for s in s_values:
        rows = []
        for x, mi, ei in zip(xs, m, e):
            run = model_a.ModelARun(FIG7_XI_OVER_A, 1.0, x * FIG7_XI_OVER_A, s, FIG7_TDP_OVER_TC, n, seed)
            pref = model_a.PREFACTOR_C * (1.0 / FIG7_TDP_OVER_TC) ** 4 / FIG7_XI_OVER_A ** 2
            f = s ** 4 / (8.0 * math.pi ** 3 * x ** 10)
            g = -pref * f * mi
            direct = -(2.0 ** 10) / math.pi ** 3 / FIG7_XI_OVER_A ** 2 * (1.0 / FIG7_TDP_OVER_TC) ** 4 \
                * run.s ** 4 / run.x ** 10 * mi
            rows.append((x, s, g, pref * f * ei, abs(g / direct - 1.0)))
        out.append(rows)
    return out


def check_model_a(quick: bool = False, seed: int = 1111) -> CheckResult:
    n = 200_000 if quick else 4_000_000
    res = CheckResult(11, "Model-A scaling slopes, prefactor identity, IS vs quadrature", True)
    worst_id = 0.0
    for lo, hi, target in ((1e-2, 1e-1, -2.0), (10.0, 100.0, -10.0)):
        xs = np.geomspace(lo, hi, 7)
        rows = fig7_gamma(xs, [0.1], n, seed)[0]
        worst_id = max(worst_id, max(r[4] for r in rows))
        slope, err = model_a.loglog_slope(xs, [r[2] for r in rows], [r[3] for r in rows])
        ok = abs(slope - target) <= 0.3
        res.passed &= ok
        res.details.append(f"x in [{lo}, {hi}]: slope {slope:.3f} +- {err:.3f} (target {target} +- 0.3)"
                           f" {'ok' if ok else 'FAILED'}")
    s_vals = [0.05, 0.1, 0.2]
    rows = [r[0] for r in fig7_gamma([1.0], s_vals, max(n // 10, 1000), seed)]
    s_slope, _ = model_a.loglog_slope(s_vals, [r[2] for r in rows])
    ok = abs(s_slope - 4.0) <= 0.05
    res.passed &= ok
    res.details.append(f"echo-time slope {s_slope:.6f} (target 4 +- 0.05)")
    res.passed &= worst_id <= 1e-12
    res.details.append(f"prefactor identity max rel diff {worst_id:.1e}")
    f = model_a.f_short_time(1.0, 0.1, 200_000 if quick else 1_000_000, seed, proposal="gamma")
    quad = model_a.momentum_quadrature(1.0, nodes=16)
    rel = abs(f.expectation / quad - 1.0)
    res.passed &= rel <= 0.05
    res.details.append(f"x=1 IS {f.expectation:.5e} +- {f.expectation_err:.1e} vs 6D quadrature {quad:.5e}"
                       f" (rel {rel:.2e})")
    return res


# 12 ------------------------------------------------------------------------

DETERMINISM_RUNS = {
    "tls-sim": ["--n2d", "0.5", "--h", "1", "--gamma", "0.5", "--tau1", "1", "--tau2", "1,2",
                "--samples", "40000", "--seed", "7", "--r-max", "2", "--chunk", "4096"],
    "tls-analytic": ["--fig5", "--grid-points", "9"],
    "filter": ["--family", "hahn", "--tau", "1", "--extent", "8", "--points", "5",
               "--telegraph-rate", "0.5", "--poly-points", "41"],
    "two-qubit": ["--n2d", "0.5", "--h", "1", "--gamma", "1", "--tau", "1", "--separation", "0.5",
                  "--samples", "30000", "--seed", "3", "--r-max", "2", "--chunk", "4096"],
    "model-a": ["--x", "0.05,1,20", "--s", "0.1", "--samples", "50000", "--seed", "5", "--chunk", "8192"],
    "validate": ["--criteria", "6,7,9", "--quick"],
}


def _data_rows(path: str) -> List[str]:
    with open(path, encoding="utf-8") as fh:
        return [ln for ln in fh if not ln.startswith("#")]


def check_determinism(quick: bool = False, seed: int = 1212) -> CheckResult:
    from . import cli

    res = CheckResult(12, "byte-identical data rows across 1, 4 and 8 workers", True)
    with tempfile.TemporaryDirectory() as tmp:
        for sub, args in DETERMINISM_RUNS.items():
            outputs = []
            for w in (1, 4, 8):
                out = os.path.join(tmp, f"{sub}-{w}.csv")
                with contextlib.redirect_stdout(io.StringIO()):
                    code = cli.main([sub, *args, "--workers", str(w), "--out", out])
                if code not in (0, 3):
                    res.passed = False
                    res.details.append(f"{sub}: exit code {code}")
                    break
                files = sorted(f for f in os.listdir(tmp) if f.startswith(f"{sub}-{w}") and f.endswith(".csv"))
                outputs.append(["".join(_data_rows(os.path.join(tmp, f))) for f in files])
            same = len(outputs) == 3 and outputs[0] == outputs[1] == outputs[2] and outputs[0]
            res.passed &= bool(same)
            res.details.append(f"{sub}: {'identical' if same else 'DIFFERENT'}")
    return res


CRITERIA: Dict[int, Callable[..., CheckResult]] = {
    1: check_correlators,
    2: check_kubo,
    3: check_gaussian_null,
    4: check_telegraph_gamma,
    5: check_angular_planar,
    6: check_normalization,
    7: check_fig5,
    8: check_t1,
    9: check_filters,
    10: check_two_qubit,
    11: check_model_a,
    12: check_determinism,
}


def run_criterion(k: int, quick: bool = False) -> CheckResult:
    return CRITERIA[k](quick=quick)


def run_all(quick: bool = False, which: Optional[Sequence[int]] = None) -> List[CheckResult]:
    return [run_criterion(k, quick) for k in (which or sorted(CRITERIA))]
