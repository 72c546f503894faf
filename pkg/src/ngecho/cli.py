"""Command-line front end.

Every subcommand resolves its parameters from (in increasing priority)
built-in defaults, an optional JSON ``--config`` file and command-line flags,
records where each value came from, and writes a CSV with a ``# key=value``
metadata header plus a JSON summary next to it.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__, bath, dipole, filters, model_a, pulses, tls, twoqubit, validation
from .io import write_csv, write_json
from .streams import DEFAULT_CHUNK, chunk_rng, worker_count

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2       # missing or malformed parameter
EXIT_VALIDATION = 3
EXIT_UNKNOWN_KEY = 4
EXIT_NON_POSITIVE = 5


class ConfigError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


def _count(text) -> int:
    """Sample counts accept scientific notation such as 1e6."""
    v = float(text)
    if v != int(v):
        raise ValueError(f"{text!r} is not an integer count")
    return int(v)


def _float_list(text) -> List[float]:
    if isinstance(text, (list, tuple)):
        return [float(t) for t in text]
    if isinstance(text, (int, float)):
        return [float(text)]
    return [float(t) for t in str(text).split(",") if t.strip()]


def _flag(text) -> bool:
    if isinstance(text, bool):
        return text
    return str(text).lower() in ("1", "true", "yes", "on")


@dataclass(frozen=True)
class Param:
    name: str
    kind: Callable[[Any], Any]
    default: Any = None
    required: bool = False
    positive: bool = False
    choices: Optional[Tuple[str, ...]] = None
    help: str = ""
    is_flag: bool = False


COMMON = [
    Param("seed", int, 0, help="root seed"),
    Param("workers", int, None, positive=True, help="worker threads (capped by NGECHO_THREADS)"),
    Param("chunk", _count, DEFAULT_CHUNK, positive=True, help="samples per RNG chunk"),
    Param("out", str, None, help="output CSV path (JSON summary written alongside)"),
]

SUBCOMMANDS: Dict[str, List[Param]] = {
    "tls-sim": [
        Param("n2d", float, required=True, positive=True, help="spin density per area"),
        Param("h", float, required=True, positive=True, help="qubit height"),
        Param("gamma", float, required=True, positive=True, help="switching rate"),
        Param("tau1", _float_list, required=True, positive=True, help="first echo time(s)"),
        Param("tau2", _float_list, required=True, positive=True, help="second echo time(s)"),
        Param("samples", _count, 100_000, positive=True),
        Param("prefactor", float, 1.0, positive=True, help="grouped dipole moment prefactor"),
        Param("r_max", float, None, positive=True, help="ensemble radius (default 5 h)"),
        Param("family", str, "ramsey", choices=("ramsey", "hahn")),
    ],
    "tls-analytic": [
        Param("fig5", _flag, False, is_flag=True, help="emit the two normalized Gamma grids (tau_c = 2 T2 and 0.4 T2)"),
        Param("n2d", float, None, positive=True),
        Param("h", float, None, positive=True),
        Param("gamma", float, None, positive=True),
        Param("prefactor", float, 1.0, positive=True),
        Param("tau1", _float_list, None, positive=True),
        Param("tau2", _float_list, None, positive=True),
        Param("pi_n_h2", float, 1.0, positive=True, help="pi n h^2 for the normalized grids"),
        Param("grid_max", float, 10.0, positive=True, help="largest echo time in units of T2"),
        Param("grid_points", int, 41, positive=True),
    ],
    "filter": [
        Param("family", str, "ramsey", choices=("ramsey", "hahn")),
        Param("tau", float, required=True, positive=True),
        Param("extent", float, 10.0, positive=True, help="frequency half-width of the grid"),
        Param("points", int, 11, positive=True, help="grid points per frequency axis"),
        Param("telegraph_rate", float, None, positive=True, help="also contract with a telegraph polyspectrum"),
        Param("poly_points", int, 121, positive=True),
        Param("poly_extent", float, None, positive=True),
    ],
    "two-qubit": [
        Param("n2d", float, required=True, positive=True),
        Param("h", float, required=True, positive=True),
        Param("gamma", float, required=True, positive=True),
        Param("tau", float, required=True, positive=True, help="Ramsey time"),
        Param("separation", float, 0.0, help="lateral qubit separation"),
        Param("samples", _count, 100_000, positive=True),
        Param("prefactor", float, 1.0, positive=True),
        Param("r_max", float, None, positive=True, help="ensemble radius around each qubit (default 5 h)"),
        Param("protocol", str, "both", choices=("coincidence", "entangled", "both")),
        Param("shots", _count, None, positive=True, help="binomial readout shots (default exact)"),
    ],
    "model-a": [
        Param("fig7", _flag, False, is_flag=True, help="sweep x over [1e-2, 1e2] and s over {0.05, 0.1, 0.2}"),
        Param("x", _float_list, None, positive=True, help="z / xi_c value(s)"),
        Param("s", _float_list, None, positive=True, help="tau_R / tau_c value(s)"),
        Param("points", int, 17, positive=True, help="x points for --fig7"),
        Param("xi_over_a", float, validation.FIG7_XI_OVER_A, positive=True),
        Param("tdp_over_tc", float, validation.FIG7_TDP_OVER_TC, positive=True),
        Param("samples", _count, 100_000, positive=True),
        Param("proposal", str, "auto", choices=("auto", "gamma", "exp")),
    ],
    "validate": [
        Param("quick", _flag, False, is_flag=True, help="reduced sample budgets"),
        Param("criteria", str, None, help="comma-separated subset, e.g. 1,6,7"),
    ],
}


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ngecho", description="Non-Gaussian echo noise workbench")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command")
    for name, params in SUBCOMMANDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="JSON file of parameters")
        for p in params + COMMON:
            flag = "--" + p.name.replace("_", "-")
            if p.is_flag:
                sp.add_argument(flag, dest=p.name, action="store_const", const=True, default=None, help=p.help)
            else:
                sp.add_argument(flag, dest=p.name, default=None, help=p.help)
    return ap


def parse_config(argv: Sequence[str]) -> Tuple[str, Dict[str, Any], Dict[str, str]]:
    """Resolve (subcommand, values, provenance) or raise :class:`ConfigError`."""
    ap = _build_parser()
    args, extra = ap.parse_known_args(list(argv))
    if args.command is None:
        raise ConfigError("a subcommand is required")
    if extra:
        raise ConfigError(f"unknown key(s): {' '.join(extra)}", EXIT_UNKNOWN_KEY)
    params = SUBCOMMANDS[args.command] + COMMON
    known = {p.name: p for p in params}
    file_vals: Dict[str, Any] = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        for k, v in raw.items():
            key = k.replace("-", "_")
            if key not in known:
                raise ConfigError(f"unknown key in config: {k}", EXIT_UNKNOWN_KEY)
            file_vals[key] = v
    values: Dict[str, Any] = {}
    prov: Dict[str, str] = {}
    for p in params:
        flag_val = getattr(args, p.name)
        if flag_val is not None:
            raw, src = flag_val, "flag"
        elif p.name in file_vals:
            raw, src = file_vals[p.name], "config"
        else:
            raw, src = p.default, "default"
        if raw is None:
            if p.required:
                raise ConfigError(f"missing required parameter --{p.name.replace('_', '-')}")
            values[p.name] = None
            prov[p.name] = src
            continue
        try:
            val = p.kind(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {p.name}: {raw!r} ({exc})") from exc
        if p.choices and val not in p.choices:
            raise ConfigError(f"{p.name} must be one of {p.choices}")
        if p.positive:
            vals = val if isinstance(val, list) else [val]
            if not vals or any(not (v > 0) for v in vals):
                raise ConfigError(f"{p.name} must be positive, got {raw!r}", EXIT_NON_POSITIVE)
        values[p.name] = val
        prov[p.name] = src
    return args.command, values, prov


# subcommand bodies: each returns (tables, summary, exit code)
# a table is (suffix, metadata extras, columns, rows)

Table = Tuple[str, Dict[str, Any], List[str], List[tuple]]


def _ensemble_bath(cfg, seed, separation=0.0):
    """One disc of spins centred between the qubits, reaching r_max beyond each of them."""
    h = cfg["h"]
    r_max = cfg["r_max"] or 5.0 * h
    rng = chunk_rng(seed, 0, stream=11)
    geom = dipole.SensorGeometry(h)
    ens = dipole.sample_ensemble(cfg["n2d"], geom, r_max + 0.5 * separation, rng, rate=cfg["gamma"],
                                 center=(0.5 * separation, 0.0))
    return ens, r_max


def run_tls_sim(cfg) -> Tuple[List[Table], Dict[str, Any], int]:
    geom = dipole.SensorGeometry(cfg["h"], moment_scale=cfg["prefactor"])
    ens, r_max = _ensemble_bath(cfg, cfg["seed"])
    v = dipole.couplings(ens, geom)
    tb = bath.TelegraphBath(v, cfg["gamma"])
    model = tls.TlsModel(cfg["n2d"], cfg["h"], cfg["gamma"], cfg["prefactor"])
    rows = []
    for i, t1 in enumerate(cfg["tau1"]):
        for j, t2 in enumerate(cfg["tau2"]):
            g, c = pulses.estimate_gamma(t1, t2, tb, cfg["samples"], cfg["seed"], cfg["family"],
                                         workers=cfg["workers"], chunk=cfg["chunk"], stream=1000 * i + j)
            quenched = tls.gamma4_ensemble(v, cfg["gamma"], t1, t2) if cfg["family"] == "ramsey" else math.nan
            rows.append((t1, t2, g.value, g.std_err, quenched, float(tls.gamma4_raw(model, t1, t2)),
                         c.x1.value, c.x2.value, c.plus.value, c.minus.value, g.status))
    cols = ["tau1", "tau2", "gamma_mc", "gamma_err", "gamma_quenched", "gamma_planar",
            "c_x1", "c_x2", "c_plus", "c_minus", "status"]
    summary = {"n_fluctuators": len(ens), "r_max": r_max, "max_v_tau": float(np.abs(v).max(initial=0.0)
                                                                           * max(cfg["tau1"] + cfg["tau2"])),
               "t2": tls.t2_of_h(model)}
    return [("", {"units": "times in the units of 1/gamma; couplings in prefactor/h^3"}, cols, rows)], summary, 0


def run_tls_analytic(cfg) -> Tuple[List[Table], Dict[str, Any], int]:
    if cfg["fig5"]:
        grid = np.linspace(0.0, cfg["grid_max"], cfg["grid_points"])
        tabs = tls.fig5_grid(grid, pi_n_h2=cfg["pi_n_h2"])
        out = []
        for ratio, tab in tabs.items():
            rows = [(a, b, tab[i, j]) for i, a in enumerate(grid) for j, b in enumerate(grid)]
            out.append((f"tc{ratio:g}", {"tau_c_over_t2": ratio, "pi_n_h2": cfg["pi_n_h2"],
                                         "units": "tau1, tau2 in units of T2"},
                        ["tau1", "tau2", "gamma4"], rows))
        return out, {"saturation_ratio": float(tabs[2.0][-1, -1] / tabs[0.4][-1, -1])}, 0
    for k in ("n2d", "h", "gamma", "tau1", "tau2"):
        if cfg[k] is None:
            raise ConfigError(f"missing required parameter --{k} (or use --fig5)")
    m = tls.TlsModel(cfg["n2d"], cfg["h"], cfg["gamma"], cfg["prefactor"])
    rows = [(a, b, float(tls.gamma4_raw(m, a, b)), float(tls.gamma4_normalized(m, a, b)))
            for a in cfg["tau1"] for b in cfg["tau2"]]
    return [("", {}, ["tau1", "tau2", "gamma4_raw", "gamma4_normalized"], rows)], \
        {"t2": tls.t2_of_h(m), "tau_c": m.tau_c}, 0


def run_filter(cfg) -> Tuple[List[Table], Dict[str, Any], int]:
    fn = filters.w4_ramsey if cfg["family"] == "ramsey" else filters.w4_hahn
    axis = np.linspace(-cfg["extent"], cfg["extent"], cfg["points"])
    w1, w2, w3 = np.meshgrid(axis, axis, axis, indexing="ij")
    vals = fn((w1, w2, w3, -(w1 + w2 + w3)), cfg["tau"])
    rows = list(zip(w1.ravel(), w2.ravel(), w3.ravel(), vals.ravel()))
    summary: Dict[str, Any] = {}
    if cfg["telegraph_rate"]:
        ext = cfg["poly_extent"] or 30.0 / cfg["tau"]
        g, err = filters.gamma_from_polyspectrum(filters.telegraph_polyspectrum(cfg["telegraph_rate"]),
                                                 cfg["family"], cfg["tau"], ext, cfg["poly_points"])
        summary.update(gamma_polyspectrum=g, gamma_err_proxy=err)
    return [("", {"units": "angular frequency in 1/time, W in time^4"}, ["w1", "w2", "w3", "W"], rows)], summary, 0


def run_two_qubit(cfg) -> Tuple[List[Table], Dict[str, Any], int]:
    g1 = dipole.SensorGeometry(cfg["h"], moment_scale=cfg["prefactor"])
    g2 = dipole.SensorGeometry(cfg["h"], moment_scale=cfg["prefactor"],
                               offset=np.array([cfg["separation"], 0.0, 0.0]))
    ens, r_max = _ensemble_bath(cfg, cfg["seed"], abs(cfg["separation"]))
    b = twoqubit.TwoQubitBath.from_geometry(ens, g1, g2)
    pred = tls.gamma12_quartic(b.couplings[0], b.couplings[1], cfg["gamma"], cfg["tau"])
    protos = ["coincidence", "entangled"] if cfg["protocol"] == "both" else [cfg["protocol"]]
    rows = []
    for name in protos:
        fn = twoqubit.protocol_coincidence if name == "coincidence" else twoqubit.protocol_entangled
        r = fn(b, cfg["tau"], cfg["samples"], cfg["seed"], workers=cfg["workers"], chunk=cfg["chunk"],
               shots=cfg["shots"])
        rows.append((name, r.c1.value, r.c2.value, r.c_plus.value, r.c_minus.value,
                     r.gamma12.value, r.gamma12.std_err, pred, r.gamma12.status))
    cols = ["protocol", "c_x1", "c_x2", "c_plus", "c_minus", "gamma12", "gamma12_err", "gamma12_quartic", "status"]
    return [("", {}, cols, rows)], {"n_fluctuators": len(ens), "r_max": r_max}, 0


def run_model_a(cfg) -> Tuple[List[Table], Dict[str, Any], int]:
    if cfg["fig7"]:
        xs = list(np.geomspace(1e-2, 1e2, cfg["points"]))
        ss = [0.05, 0.1, 0.2]
    else:
        if cfg["x"] is None or cfg["s"] is None:
            raise ConfigError("missing required parameter --x/--s (or use --fig7)")
        xs, ss = cfg["x"], cfg["s"]
    m, e, props = model_a.short_time_expectation(xs, cfg["samples"], cfg["seed"], cfg["proposal"],
                                                 cfg["workers"], cfg["chunk"])
    pref = model_a.PREFACTOR_C * (1.0 / cfg["tdp_over_tc"]) ** 4 / cfg["xi_over_a"] ** 2
    rows = []
    for s in ss:
        for x, mi, ei, pr in zip(xs, m, e, props):
            f = s ** 4 / (8.0 * math.pi ** 3 * x ** 10)
            valid = s <= model_a.SHORT_TIME_LIMIT
            rows.append((float(x), float(s), f * mi, f * ei, -pref * f * mi, pref * f * ei, pr,
                         "ok" if valid else "outside-short-time"))
    cols = ["x", "s", "F", "F_err", "gamma4", "gamma4_err", "proposal", "status"]
    return [("", {"xi_over_a": cfg["xi_over_a"], "tdp_over_tc": cfg["tdp_over_tc"]}, cols, rows)], {}, 0


def run_validate(cfg) -> Tuple[List[Table], Dict[str, Any], int]:
    which = [int(k) for k in cfg["criteria"].split(",")] if cfg["criteria"] else None
    results = validation.run_all(cfg["quick"], which)
    rows = []
    for r in results:
        print(r.line())
        for d in r.details:
            print("    " + d)
        rows.append((r.criterion, "pass" if r.passed else "fail", r.name.replace(",", ";")))
    code = EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION
    return [("", {}, ["criterion", "result", "name"], rows)], {"details": {r.criterion: r.details for r in results}}, code


RUNNERS = {
    "tls-sim": run_tls_sim,
    "tls-analytic": run_tls_analytic,
    "filter": run_filter,
    "two-qubit": run_two_qubit,
    "model-a": run_model_a,
    "validate": run_validate,
}


def _emit(command, cfg, prov, tables, summary, wall):
    base_meta = {"command": command, "version": __version__, "seed": cfg["seed"],
                 "workers": worker_count(cfg["workers"]), "wall_time_s": round(wall, 3),
                 "params": {k: v for k, v in cfg.items() if k not in ("out", "workers")},
                 "provenance": prov}
    out = cfg["out"]
    written = []
    for suffix, extra, cols, rows in tables:
        meta = dict(base_meta, **extra)
        if out is None:
            if command != "validate":
                write_csv(sys.stdout, meta, cols, rows)
            continue
        path = Path(out)
        if suffix:
            path = path.with_name(f"{path.stem}.{suffix}{path.suffix or '.csv'}")
        write_csv(path, meta, cols, rows)
        written.append(str(path))
    if out is not None:
        write_json(Path(out).with_suffix(".json"), dict(base_meta, summary=summary, files=written))


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        command, cfg, prov = parse_config(argv)
        t0 = time.perf_counter()
        tables, summary, code = RUNNERS[command](cfg)
        _emit(command, cfg, prov, tables, summary, time.perf_counter() - t0)
        return code
    except ConfigError as exc:
        print(f"ngecho: error: {exc}", file=sys.stderr)
        return exc.code
    except SystemExit as exc:  # argparse usage errors
        return EXIT_CONFIG if exc.code else EXIT_OK
    except Exception as exc:  # noqa: BLE001
        print(f"ngecho: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
