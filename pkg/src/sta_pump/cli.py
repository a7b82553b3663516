"""Command-line front end.

Each subcommand reads one flat key/value configuration (YAML or JSON),
applies flag overrides, validates everything, runs, and writes CSV/JSON data
plus PNG figures into ``output_dir``. A ``manifest.json`` with the fully
resolved configuration is always written; passing it back through
``--config`` reproduces the run byte for byte.

Exit codes: 0 success, 2 configuration or validity error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError, NumericalError
from .evolution import EvolutionConfig
from .lab import LambdaParams, pulse_sequence, validate_elimination, write_pulse_csv
from .model import DriveParams, Scheme
from .noise import NoiseConfig, noisy_frequency_sweep, resolve_threads
from .observables import (
    average_position_shift,
    chern_number,
    dynamical_curvature,
    position_shift,
    trajectory_grid,
)
from .realspace import pump_run

COMMANDS = ("bloch", "shift", "sweep", "realspace", "pulses")
FORMATS = ("csv", "json")

DEFAULTS: dict = {
    # drive
    "J": -1.0,
    "delta0": 0.8,
    "Delta0": 2.0,
    "omega": 10.0,
    "phi0": 0.0,
    "scheme": "STATP",
    "n_k": 128,
    "n_t": 4096,
    "gap_tol": 1e-6,
    # integrator
    "steps_per_period": 4096,
    "substep_cap": 0.05,
    "time_variable": "physical_t",
    "periods": 1,
    # noise
    "c": 0.0,
    "channel": "off_diagonal",
    "trials": 1,
    "seed": 0,
    "shared_across_k": True,
    "normalization": "per_step",
    # sweep
    "omegas": [0.1, 1.0, 10.0, 1e3, 1e6, 1e10],
    "sweep_schemes": ["TP", "STATP"],
    # lattice
    "L": 32,
    "home_cell": None,
    "lattice_method": "auto",
    "frame_stride": 64,
    # lab
    "Delta": 2 * math.pi * 2.5e9,
    "unit": 1e-7,
    "lab_k": math.pi / 4,
    "lab_samples": None,
    # output
    "t_stride": 16,
    "output_dir": "out",
    "formats": ["csv", "json"],
    "plots": True,
}
NULLABLE = {"gap_tol", "home_cell", "lab_samples"}


# --------------------------------------------------------------------------
# configuration


def _coerce(key, value):
    default = DEFAULTS[key]
    if value is None:
        if key in NULLABLE:
            return None
        raise ConfigError(f"{key} may not be null")
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(default, int) or key in {"home_cell", "lab_samples"}:
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise TypeError
            return int(float(value))
        if isinstance(default, float):
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if isinstance(default, str):
            if not isinstance(value, str):
                raise TypeError
            return value
        if isinstance(default, list):
            items = value if isinstance(value, (list, tuple)) else [value]
            kind = type(default[0])
            return [kind(v) for v in items]
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return value


def load_config_file(path) -> dict:
    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path} must hold a key/value mapping")
    if "config" in doc and "tool" in doc:  # a manifest from an earlier run
        doc = doc["config"]
    return doc


def resolve_config(file_doc: dict | None = None, overrides: dict | None = None) -> dict:
    cfg = dict(DEFAULTS)
    for source in (file_doc or {}, overrides or {}):
        unknown = sorted(set(source) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        for key, value in source.items():
            cfg[key] = _coerce(key, value)
    bad = sorted(set(cfg["formats"]) - set(FORMATS))
    if bad:
        raise ConfigError(f"unknown output formats: {bad}")
    for key in ("t_stride", "frame_stride"):
        if cfg[key] < 1:
            raise ConfigError(f"{key} must be >= 1")
    return cfg


def drive_params(cfg: dict, **changes) -> DriveParams:
    keys = ("J", "delta0", "Delta0", "omega", "phi0", "scheme", "n_k", "n_t", "gap_tol")
    kw = {k: cfg[k] for k in keys}
    kw.update(changes)
    return DriveParams(**kw)


def evolution_config(cfg: dict) -> EvolutionConfig:
    return EvolutionConfig(cfg["steps_per_period"], cfg["substep_cap"], cfg["time_variable"], cfg["periods"])


def noise_config(cfg: dict) -> NoiseConfig:
    return NoiseConfig(cfg["c"], cfg["channel"], cfg["trials"], cfg["seed"], cfg["shared_across_k"], cfg["normalization"])


# --------------------------------------------------------------------------
# output helpers


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % x


class Output:
    def __init__(self, cfg: dict):
        self.dir = Path(cfg["output_dir"])
        self.formats = set(cfg["formats"])
        self.plots = cfg["plots"]
        self.dir.mkdir(parents=True, exist_ok=True)
        self.written: list[str] = []

    def csv(self, name, header, rows):
        if "csv" not in self.formats:
            return
        with open(self.dir / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(x) for x in row])
        self.written.append(name)

    def json(self, name, doc, always=False):
        if not always and "json" not in self.formats:
            return
        with open(self.dir / name, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        self.written.append(name)

    def figure(self, name, fn, *args, **kw):
        if self.plots:
            fn(*args, path=self.dir / name, **kw)
            self.written.append(name)


def _schemes():
    return (Scheme.TP, Scheme.STATP)


# --------------------------------------------------------------------------
# subcommands


def cmd_bloch(cfg: dict, out: Output) -> dict:
    p = drive_params(cfg)
    evo = evolution_config(cfg)
    stride = cfg["t_stride"]
    rows, summary, grids = [], {}, {}
    for scheme in _schemes():
        g = trajectory_grid(p, evo, scheme)
        B = dynamical_curvature(g)
        grids[scheme.value] = g
        summary[f"ybar_{scheme.value.lower()}"] = average_position_shift(B, -1)
        for i, k in enumerate(g.k):
            for j in range(0, len(g.t), stride):
                rows.append((scheme.value, k, g.t[j], *g.sigma[i, j], B.values[i, j]))
    summary["chern"] = chern_number(p).integer
    out.csv("trajectory.csv", ("scheme", "k", "t", "sx", "sy", "sz", "curvature"), rows)
    out.json("summary.json", summary)
    from .plotting import plot_bloch

    out.figure("bloch.png", plot_bloch, grids)
    return summary


def cmd_shift(cfg: dict, out: Output) -> dict:
    p = drive_params(cfg)
    evo = evolution_config(cfg)
    y, ybar, t = {}, {}, None
    for scheme in _schemes():
        g = trajectory_grid(p, evo, scheme)
        B = dynamical_curvature(g)
        y[scheme.value] = position_shift(B)
        ybar[scheme.value] = average_position_shift(B)
        t = g.t
    out.csv("yk.csv", ("k", "y_tp", "y_statp"), zip(p.k_grid, y["TP"], y["STATP"]))
    idx = range(0, len(t), cfg["t_stride"])
    out.csv("ybar_t.csv", ("t", "ybar_tp", "ybar_statp"), ((t[j], ybar["TP"][j], ybar["STATP"][j]) for j in idx))
    summary = {f"ybar_{s.lower()}": float(v[-1]) for s, v in ybar.items()}
    out.json("summary.json", summary)
    from .plotting import plot_shift

    out.figure("shift.png", plot_shift, p.k_grid, y, t / t[-1], ybar)
    return summary


def cmd_sweep(cfg: dict, out: Output, threads=None) -> dict:
    template = drive_params(cfg)
    for w in cfg["omegas"]:
        drive_params(cfg, omega=w)  # validate every point before running
    noise = noise_config(cfg)
    evo = evolution_config(cfg)
    results = []
    for scheme in cfg["sweep_schemes"]:
        results += noisy_frequency_sweep(template, cfg["omegas"], noise, evo, scheme, threads)
    out.csv(
        "sweep.csv",
        ("omega", "scheme", "ybar_mean", "ybar_std", "trials"),
        ((r.omega, r.scheme, r.mean, r.std, r.trials) for r in results),
    )
    summary = {
        "error_bar": "1 standard deviation across trials",
        "points": [{k: v for k, v in dataclasses.asdict(r).items() if k != "values"} for r in results],
    }
    out.json("summary.json", summary)
    from .plotting import plot_sweep

    out.figure("sweep.png", plot_sweep, results)
    return summary


def cmd_realspace(cfg: dict, out: Output) -> dict:
    p = drive_params(cfg)
    run = pump_run(p, cfg["L"], evolution_config(cfg), method=cfg["lattice_method"], home_cell=cfg["home_cell"])
    s = run.stats
    frames = range(0, len(s.t), cfg["frame_stride"])
    if (len(s.t) - 1) % cfg["frame_stride"]:
        frames = list(frames) + [len(s.t) - 1]
    sites = np.arange(run.density.shape[1])
    out.csv("density.csv", ("t", "l", "prob"), ((s.t[j], l, run.density[j, l]) for j in frames for l in sites))
    out.csv("stats.csv", ("t", "dX_over_d", "dW"), zip(s.t, s.dX_over_d, s.dW))
    summary = {
        "scheme": run.scheme,
        "L": run.L,
        "X0": s.X0,
        "W0": s.W0,
        "final_dX_over_d": float(s.dX_over_d[-1]),
        "final_dW": float(s.dW[-1]),
    }
    out.json("summary.json", summary)
    from .plotting import plot_density

    out.figure("density.png", plot_density, s.t / s.t[-1], run.density, s.dX_over_d, s.dW,
               title=f"{run.scheme}, omega={p.omega:g}")
    return summary


def cmd_pulses(cfg: dict, out: Output) -> dict:
    p = drive_params(cfg)
    lp = LambdaParams(cfg["Delta"], cfg["unit"])
    seqs = {s.value: pulse_sequence(p, cfg["lab_k"], lp, s, cfg["lab_samples"]) for s in _schemes()}
    report = {}
    for name, seq in seqs.items():
        if "csv" in out.formats:
            write_pulse_csv(seq, lp, out.dir / f"pulses_{name.lower()}.csv")
            out.written.append(f"pulses_{name.lower()}.csv")
        r = validate_elimination(seq, lp).as_dict()
        r["duration_seconds"] = seq.duration
        report[name] = r
    out.json("elimination_report.json", report)
    from .plotting import plot_pulses

    out.figure("pulses.png", plot_pulses, seqs, lp.Delta)
    return report


HANDLERS = {
    "bloch": cmd_bloch,
    "shift": cmd_shift,
    "sweep": cmd_sweep,
    "realspace": cmd_realspace,
    "pulses": cmd_pulses,
}

HELP = {
    "bloch": "Pauli-expectation trajectories and curvature for both schemes",
    "shift": "position shift y(k, T) and average shift over time",
    "sweep": "average shift versus drive frequency, optionally with noise",
    "realspace": "Wannier wavepacket transport on the lattice",
    "pulses": "Raman pulse sequences and elimination check",
}


# --------------------------------------------------------------------------
# entry point


def _parse_set(items) -> dict:
    doc = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        doc[key.strip()] = yaml.safe_load(raw)
    return doc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sta-pump", description="Driven Rice-Mele pump simulations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=HELP[name])
        sp.add_argument("-c", "--config", help="YAML/JSON configuration or a previous manifest.json")
        sp.add_argument("-o", "--output-dir", dest="output_dir")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one configuration key")
        sp.add_argument("--omega", type=float)
        sp.add_argument("--scheme", choices=[s.value for s in Scheme])
        sp.add_argument("--trials", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int, help="worker processes (default: $STA_PUMP_THREADS or 1)")
        sp.add_argument("--no-plots", dest="plots", action="store_false", default=None)
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        file_doc = load_config_file(args.config) if args.config else {}
        overrides = _parse_set(args.set)
        for key in ("output_dir", "omega", "scheme", "trials", "seed", "plots"):
            value = getattr(args, key)
            if value is not None:
                overrides[key] = value
        cfg = resolve_config(file_doc, overrides)
        threads = resolve_threads(args.threads)
        out = Output(cfg)
        manifest = {
            "tool": "sta-pump",
            "version": __version__,
            "command": args.command,
            "seed": cfg["seed"],
            "config": cfg,
        }
        out.json("manifest.json", manifest, always=True)
        if args.command == "sweep":
            summary = cmd_sweep(cfg, out, threads)
        else:
            summary = HANDLERS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(json.dumps({"command": args.command, "output_dir": str(out.dir), "files": out.written}))
    print(json.dumps(summary, sort_keys=True, default=float))
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
