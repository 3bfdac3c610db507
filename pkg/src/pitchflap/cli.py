"""Command-line front end.

Every command writes its data to ``--out`` (CSV by default, JSON with
``--format json``), writes a ``<command>.provenance.json`` sidecar that is
enough to re-run it, and echoes the provenance block on stdout.

Exit codes: 0 success, 1 numerical error, 2 configuration error,
3 certification failure (output is still written).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from . import ctcr, dde_sim, optimizer, rootfinder
from .quasipoly import extract_pq
from .rotor_model import (
    ControlGains,
    RotorParams,
    boundary_chart,
    build_delay_system,
    classify_uncontrolled,
)

COMMANDS = (
    "boundaries", "classify", "crossings", "intervals", "roots",
    "simulate", "sweep-gains", "optimize-delay", "optimize",
)

PARAM_KEYS = tuple(f.name for f in fields(RotorParams))

DEFAULTS: dict[str, object] = {
    "a": 6.75e-4,
    "b": 0.6e-4,
    "tau": 0.2296,
    "tau_max": 2.0 * math.pi,
    "region": rootfinder.DEFAULT_REGION.as_list(),
    "grid_step": rootfinder.DEFAULT_STEP,
    "dump_curves": False,
    "x0": [0.0, 0.01, 0.0, 0.0],
    "psi_end": 25.0,
    "step": 1e-3,
    "history": "constant",
    "window": None,
    "sigma_range": [0.0, 0.08],
    "omega_range": [1.0, 2.15],
    "n_points": 50,
    "a_range": [5e-4, 9e-4],
    "b_range": [0.0, 2e-4],
    "n_a": 41,
    "n_b": 41,
    "interval": None,
    "budget": 300,
    "format": "csv",
}

CONFIG_KEYS = frozenset(PARAM_KEYS) | frozenset(DEFAULTS)


class ConfigError(ValueError):
    pass


class CertificationError(RuntimeError):
    pass


# ------------------------------------------------------------------ config

def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return data


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then config file, then explicit command-line flags."""
    cfg = dict(DEFAULTS)
    cfg.update({k: getattr(RotorParams(), k) for k in PARAM_KEYS})
    cfg.update(load_config(args.config))
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            cfg[key] = value
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {cfg['format']!r}")
    return cfg


def rotor_params(cfg: dict) -> RotorParams:
    try:
        return RotorParams(**{k: float(cfg[k]) for k in PARAM_KEYS})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def gains(cfg: dict) -> ControlGains:
    try:
        return ControlGains(float(cfg["a"]), float(cfg["b"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _pair(cfg: dict, key: str) -> tuple[float, float] | None:
    v = cfg[key]
    if v is None:
        return None
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ConfigError(f"{key} must be a pair of numbers")
    return float(v[0]), float(v[1])


# ------------------------------------------------------------------ output

def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def json_text(data) -> str:
    return json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n"


class Emitter:
    def __init__(self, out: Path, fmt: str, command: str):
        self.out = out
        self.fmt = fmt
        self.command = command
        self.files: list[str] = []

    def table(self, name: str, header: list[str], rows: list) -> None:
        rows = list(rows)
        if self.fmt == "csv":
            path = self.out / f"{name}.csv"
            _atomic_write(path, csv_text(header, rows))
        else:
            path = self.out / f"{name}.json"
            _atomic_write(path, json_text({"columns": header, "rows": rows}))
        self.files.append(path.name)

    def document(self, name: str, data: dict) -> None:
        path = self.out / f"{name}.json"
        _atomic_write(path, json_text(data))
        self.files.append(path.name)


# ------------------------------------------------------------------ commands

def cmd_boundaries(cfg, em: Emitter) -> dict:
    chart = boundary_chart(_pair(cfg, "sigma_range"), _pair(cfg, "omega_range"),
                           int(cfg["n_points"]), rotor_params(cfg))
    em.table("boundaries_divergence", ["sigma", "nu1_sq"], chart.divergence)
    em.table("boundaries_flutter", ["omega_f", "nu1_sq", "sigma"], chart.flutter)
    return {"n_divergence": len(chart.divergence), "n_flutter": len(chart.flutter),
            "skipped_omega_f": chart.skipped}


def cmd_classify(cfg, em: Emitter) -> dict:
    p = rotor_params(cfg)
    c = classify_uncontrolled(p)
    em.table("classify", ["sigma", "nu1_sq", "label", "n_divergent", "n_flutter_pairs", "marginal"],
             [(p.sigma, p.nu1_sq, c.label.value, c.n_divergent, c.n_flutter_pairs, c.marginal)])
    return {"label": c.label.value, "marginal": c.marginal}


def _table(cfg):
    p, g = rotor_params(cfg), gains(cfg)
    sys_ = build_delay_system(p, g, 0.0)
    return ctcr.stability_table(sys_, float(cfg["tau_max"])), extract_pq(sys_)


def cmd_crossings(cfg, em: Emitter) -> dict:
    table, qp = _table(cfg)
    rows = [(bp.omega_c, bp.tau, bp.k, bp.rt, bp.nu_after) for bp in table.breakpoints]
    em.table("crossings", ["omega_c", "tau", "k", "rt", "nu_after"], rows)
    summary = {
        "quasipolynomial": qp.to_dict(),
        "nu_zero": table.nu_zero,
        "families": [{"omega_c": c.omega_c, "tau_core": c.tau_core, "rt": c.rt} for c in table.crossings],
        "certified": table.certified,
        "notes": table.notes,
    }
    if not table.certified:
        raise CertificationError("stability table not certified", summary)
    return summary


def cmd_intervals(cfg, em: Emitter) -> dict:
    table, qp = _table(cfg)
    em.table("intervals", ["tau_lo", "tau_hi", "nu"], table.intervals())
    summary = {"quasipolynomial": qp.to_dict(), "stable_intervals": table.stable_intervals,
               "certified": table.certified, "notes": table.notes}
    if not table.certified:
        raise CertificationError("stability table not certified", summary)
    return summary


def cmd_roots(cfg, em: Emitter) -> dict:
    p, g = rotor_params(cfg), gains(cfg)
    qp = extract_pq(build_delay_system(p, g, float(cfg["tau"])))
    region = cfg["region"]
    if not isinstance(region, (list, tuple)) or len(region) != 4:
        raise ConfigError("region must be [re_min, re_max, im_min, im_max]")
    try:
        reg = rootfinder.Region(*map(float, region))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rs = rootfinder.find_roots(qp, reg, float(cfg["grid_step"]))
    em.table("roots", ["re", "im", "residual"], [(r.re, r.im, r.residual) for r in rs.roots])
    if cfg["dump_curves"]:
        zc = rootfinder.zero_curves(qp, reg, float(cfg["grid_step"]))
        rows = [("re", z.real, z.imag) for z in zc.re_points] + \
               [("im", z.real, z.imag) for z in zc.im_points]
        em.table("roots_curves", ["curve", "re", "im"], rows)
    summary = {"quasipolynomial": qp.to_dict(), "n_roots": len(rs.roots),
               "certified_count": rs.certified_count, "certified": rs.certified, "notes": rs.notes}
    if not rs.certified:
        raise CertificationError("root count not certified", summary)
    return summary


def cmd_simulate(cfg, em: Emitter) -> dict:
    p, g = rotor_params(cfg), gains(cfg)
    x0 = cfg["x0"]
    if not isinstance(x0, (list, tuple)) or len(x0) != 4:
        raise ConfigError("x0 must have four entries")
    ts = dde_sim.simulate(build_delay_system(p, g, float(cfg["tau"])), [float(v) for v in x0],
                          float(cfg["psi_end"]), float(cfg["step"]), history=str(cfg["history"]))
    em.table("simulate", ["psi", "theta", "beta", "theta_dot", "beta_dot"], ts.rows())
    window = _pair(cfg, "window") or (0.4 * float(cfg["psi_end"]), float(cfg["psi_end"]))
    summary = {"step_used": ts.step, "diverged": ts.diverged, "window": window}
    try:
        summary["growth_rate"] = dde_sim.growth_rate(ts, window)
    except dde_sim.GrowthRateError as exc:
        summary["growth_rate"] = None
        summary["growth_rate_error"] = str(exc)
    return summary


def cmd_sweep(cfg, em: Emitter) -> dict:
    grid = optimizer.sweep_gain_surface(
        rotor_params(cfg), float(cfg["tau"]), _pair(cfg, "a_range"), _pair(cfg, "b_range"),
        int(cfg["n_a"]), int(cfg["n_b"]), grid_step=float(cfg["grid_step"]))
    header = ["a\\b"] + [repr(float(b)) for b in grid.b_values]
    rows = [[float(a)] + [float(v) for v in grid.values[i]] for i, a in enumerate(grid.a_values)]
    em.table("sweep", header, rows)
    summary = {"n_uncertified": int(np.count_nonzero(~grid.certified))}
    try:
        a, b, v = grid.argmin
        summary["argmin"] = {"a": a, "b": b, "abscissa": v}
    except optimizer.OptimizationError:
        summary["argmin"] = None
    if summary["n_uncertified"]:
        raise CertificationError("some grid cells were not certified", summary)
    return summary


def cmd_optimize_delay(cfg, em: Emitter) -> dict:
    try:
        opt = optimizer.optimal_delay(rotor_params(cfg), gains(cfg), _pair(cfg, "interval"),
                                      grid_step=float(cfg["grid_step"]))
    except optimizer.OptimizationError as exc:
        raise CertificationError(str(exc), {}) from exc
    root = opt.root if opt.root is not None else complex("nan")
    em.table("optimize_delay", ["tau_star", "abscissa", "tau_lo", "tau_hi", "root_re", "root_im"],
             [(opt.tau, opt.abscissa, opt.interval[0], opt.interval[1], root.real, root.imag)])
    return {"tau_star": opt.tau, "abscissa": opt.abscissa, "interval": opt.interval,
            "method": opt.method, "evaluations": opt.evaluations}


def cmd_optimize(cfg, em: Emitter) -> dict:
    try:
        res = optimizer.optimize_joint(rotor_params(cfg), (float(cfg["a"]), float(cfg["b"]),
                                       float(cfg["tau"])), int(cfg["budget"]),
                                       grid_step=float(cfg["grid_step"]))
    except optimizer.OptimizationError as exc:
        raise CertificationError(str(exc), {}) from exc
    em.table("optimize", ["a", "b", "tau", "abscissa", "initial_abscissa"],
             [(res.a, res.b, res.tau, res.abscissa, res.initial_abscissa)])
    return {"a": res.a, "b": res.b, "tau": res.tau, "abscissa": res.abscissa,
            "initial_abscissa": res.initial_abscissa, "converged": res.converged,
            "evaluations": res.evaluations, "notes": res.notes}


HANDLERS = {
    "boundaries": cmd_boundaries,
    "classify": cmd_classify,
    "crossings": cmd_crossings,
    "intervals": cmd_intervals,
    "roots": cmd_roots,
    "simulate": cmd_simulate,
    "sweep-gains": cmd_sweep,
    "optimize-delay": cmd_optimize_delay,
    "optimize": cmd_optimize,
}

TOLERANCES = {
    "eigen_real_band": 1e-9,
    "eta_positive": ctcr.ETA_MIN,
    "crossing_residual_rel": ctcr.CROSSING_RTOL,
    "root_accept_rel": rootfinder.ACCEPT_TOL,
    "root_dedup": rootfinder.DEDUP_TOL,
    "newton_max_iter": rootfinder.NEWTON_MAX_ITER,
}


# ------------------------------------------------------------------ parser

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    for key in PARAM_KEYS:
        common.add_argument("--" + key.replace("_", "-"), dest=key, type=float)
    common.add_argument("--a", type=float, help="position gain")
    common.add_argument("--b", type=float, help="rate gain")
    common.add_argument("--tau", type=float, help="delay, azimuth radians")

    ap = argparse.ArgumentParser(prog="pitchflap", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("boundaries", parents=[common], help="uncontrolled stability boundaries")
    p.add_argument("--sigma-range", dest="sigma_range", type=float, nargs=2)
    p.add_argument("--omega-range", dest="omega_range", type=float, nargs=2)
    p.add_argument("--n-points", dest="n_points", type=int)

    sub.add_parser("classify", parents=[common], help="uncontrolled stability zone")

    for name in ("crossings", "intervals"):
        p = sub.add_parser(name, parents=[common], help=f"delay {name} table")
        p.add_argument("--tau-max", dest="tau_max", type=float)

    p = sub.add_parser("roots", parents=[common], help="characteristic roots in a rectangle")
    p.add_argument("--region", type=float, nargs=4, metavar=("RE_MIN", "RE_MAX", "IM_MIN", "IM_MAX"))
    p.add_argument("--grid-step", dest="grid_step", type=float)
    p.add_argument("--dump-curves", dest="dump_curves", action="store_true", default=None)

    p = sub.add_parser("simulate", parents=[common], help="integrate the delayed system")
    p.add_argument("--x0", type=float, nargs=4)
    p.add_argument("--psi-end", dest="psi_end", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--history", choices=("constant", "zero"))
    p.add_argument("--window", type=float, nargs=2)

    p = sub.add_parser("sweep-gains", parents=[common], help="abscissa over (a, b)")
    p.add_argument("--a-range", dest="a_range", type=float, nargs=2)
    p.add_argument("--b-range", dest="b_range", type=float, nargs=2)
    p.add_argument("--n-a", dest="n_a", type=int)
    p.add_argument("--n-b", dest="n_b", type=int)
    p.add_argument("--grid-step", dest="grid_step", type=float)

    p = sub.add_parser("optimize-delay", parents=[common], help="best delay in a stable interval")
    p.add_argument("--interval", type=float, nargs=2)
    p.add_argument("--grid-step", dest="grid_step", type=float)

    p = sub.add_parser("optimize", parents=[common], help="joint (a, b, tau) descent")
    p.add_argument("--budget", type=int)
    p.add_argument("--grid-step", dest="grid_step", type=float)
    return ap


def _provenance(command: str, cfg: dict, files: list[str], summary: dict, status: str) -> dict:
    return {
        "command": command,
        "status": status,
        "config": {k: cfg[k] for k in sorted(cfg)},
        "versions": {"pitchflap": __version__, "numpy": np.__version__, "python": sys.version.split()[0]},
        "seeds": None,
        "tolerances": TOLERANCES,
        "files": files,
        "summary": summary,
    }


def _fail(category: str, message: str, code: int) -> int:
    print(json.dumps({"error": category, "message": message}), file=sys.stderr)
    return code


def run(command: str, args: argparse.Namespace) -> int:
    try:
        cfg = resolve(args)
        rotor_params(cfg)
        gains(cfg)
    except ConfigError as exc:
        return _fail("config", str(exc), 2)
    em = Emitter(Path(args.out), cfg["format"], command)
    status, code = "ok", 0
    try:
        summary = HANDLERS[command](cfg, em)
    except ConfigError as exc:
        return _fail("config", str(exc), 2)
    except CertificationError as exc:
        summary = exc.args[1] if len(exc.args) > 1 else {}
        summary = dict(summary, error=str(exc.args[0]))
        status, code = "uncertified", 3
    except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        return _fail("numerical", str(exc), 1)
    prov = _provenance(command, cfg, list(em.files), summary, status)
    em.document(f"{command}.provenance", prov)
    sys.stdout.write(json_text(prov))
    if code:
        print(json.dumps({"error": "certification", "message": summary.get("error", "")}),
              file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else 2
    return run(args.command, args)


if __name__ == "__main__":
    sys.exit(main())
