"""Command-line entry point.

Every subcommand reads a JSON config, fills in defaults, rejects unknown keys
and writes its artifacts plus a ``manifest.json`` holding the fully resolved
config. Passing that manifest back as ``--config`` reproduces every output
byte for byte.

Exit codes: 0 success, 2 config error, 3 propagation failure, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .integrate import IntegrationError, IntegratorConfig, integrate
from .metrics import (NoCrossing, NoPropagation, asymptotic_speed, bistable_window,
                      original_positions, require_region2, velocity_series)
from .model import DomainError, EdgeParams, PathwaySpec
from .output import write_atomic, csv_to_records
from .rescaling import Mode, NoHomogeneousWave, SpeedOracle, rescale, table_for_pathway
from .stationary import SeparatrixError, TailNotConverged, stationary_profile
from .sweep import (FIGURE_GRADIENTS, EnsembleFailure, GradientKind, GradientSpec,
                    StochasticEnsembleSpec, WindowTooShort, build_gradient,
                    default_sigma_grid, run_comparison, sample_realization, sweep)

log = logging.getLogger("cascadewave")

EXIT_OK, EXIT_CONFIG, EXIT_PROPAGATION, EXIT_NUMERICAL = 0, 2, 3, 4
COMMANDS = ("simulate", "stationary", "wavespeed", "rescale", "sweep")
MANIFEST_KEYS = {"command", "config", "seed", "format", "version"}


class ConfigError(ValueError):
    pass


def _integrator_defaults(**over) -> dict:
    return {**IntegratorConfig().to_dict(), **over}


DEFAULTS = {
    "simulate": {
        "recipe": None,
        "pathway": None,
        "integrator": _integrator_defaults(),
        "snapshots": [],
        "digits": 10,
    },
    "stationary": {
        "recipe": None,
        "edge": {"alpha": 1.0, "beta": 2.0, "phi": 0.0},
        "x0": 0.6,
        "n": 200,
        "fit": True,
    },
    "wavespeed": {
        "recipe": None,
        "pathway": None,
        "integrator": _integrator_defaults(t_end=1e5, stop_on_arrival=True),
        "B_values": [1.5, 3.0, 5.0, 10.0],
        "phi_points": 25,
        "phi_margin": 0.01,
        "alpha": 1.0,
        "n": 200,
        "series_t_end": 100.0,
    },
    "rescale": {
        "recipe": None,
        "pathway": None,
        "gradient": None,
        "ensemble": None,
        "realization": 0,
        "oracle": {"mode": "table", "n_B": 32, "n_u": 9, "margin": 0.1},
        "integrator": _integrator_defaults(t_end=5000.0, stop_on_arrival=True),
        "full_series": True,
        "write_trajectory": False,
    },
    "sweep": {
        "ensemble": {"alpha0": 1.0, "beta0": 5.0, "phi": 0.0, "n": 200, "realizations": 200},
        "sigma_grid": default_sigma_grid(),
        "table": {"n_B": 32, "margin": 0.1},
        "integrator": _integrator_defaults(t_end=5000.0, stop_on_arrival=True),
    },
}


def _gradient_dict(g: GradientSpec) -> dict:
    return {"kind": g.kind.value, "lo": g.lo, "hi": g.hi,
            "base": {"alpha": g.base.alpha, "beta": g.base.beta, "phi": g.base.phi},
            "n": g.n, "x0": g.x0, "initial": g.initial}


RECIPES = {
    "simulate": {
        "fig4": {"integrator": {"t_end": 2000.0},
                 "snapshots": [0, 10, 20, 50, 100, 200, 500, 1000, 2000]},
    },
    "stationary": {"fig6": {}},
    "wavespeed": {"fig5": {}},
    "rescale": {
        **{name: {"gradient": _gradient_dict(g)} for name, g in FIGURE_GRADIENTS.items()},
        "stochastic": {"full_series": False,
                       "ensemble": {"sigma": 0.4, "alpha0": 1.0, "beta0": 5.0, "phi": 0.0,
                                    "n": 200}},
    },
    "sweep": {},
}

# "fig4" recipe panels: (phi, initial state, input)
FIG4_PANELS = {
    "a": (0.0, -1.0, 0.9),
    "b": (0.0, 1.0, -0.9),
    "c": (-0.75, -1.0, 0.9),
    "d": (0.75, 1.0, -0.9),
    "e": (0.3, 1.0, -0.9),
    "f": (0.3, -1.0, 0.9),
}
FIG6_B = (1.5, 3.0, 5.0, 10.0)
FIG6_X0 = (0.005, 0.05, 0.2, 0.6)


# ---------------------------------------------------------------- config handling

def _merge(defaults: dict, user: dict, path: str = "") -> dict:
    """Overlay ``user`` on ``defaults``. Object-valued defaults are merged key by
    key; sections defaulting to null are taken whole and checked later."""
    out = copy.deepcopy(defaults)
    for k, v in user.items():
        where = f"{path}{k}"
        if k not in defaults:
            raise ConfigError(f"unknown key '{where}'")
        if isinstance(defaults[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"'{where}' must be an object")
            out[k] = _merge(defaults[k], v, where + ".")
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_document(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc


def resolve(command: str, doc: dict, seed: int | None = None,
            fmt: str | None = None) -> dict:
    """Turn a user document (plain config or manifest) into a resolved manifest."""
    doc = copy.deepcopy(doc)
    if "command" in doc:
        unknown = set(doc) - MANIFEST_KEYS
        if unknown:
            raise ConfigError(f"unknown manifest keys: {sorted(unknown)}")
        if doc["command"] != command:
            raise ConfigError(f"manifest is for '{doc['command']}', not '{command}'")
        body = doc.get("config", {})
        seed = doc.get("seed") if seed is None else seed
        fmt = doc.get("format") if fmt is None else fmt
    else:
        body = doc
        for key in ("seed", "format"):
            if key in body:
                value = body.pop(key)
                if key == "seed" and seed is None:
                    seed = value
                if key == "format" and fmt is None:
                    fmt = value
    seed = 0 if seed is None else seed
    fmt = fmt or "csv"
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"format must be 'csv' or 'json', got {fmt!r}")
    if not isinstance(body, dict):
        raise ConfigError("'config' must be an object")

    cfg = _merge(DEFAULTS[command], body)
    recipe = cfg.get("recipe")
    if recipe is not None:
        if recipe not in RECIPES[command]:
            raise ConfigError(f"unknown recipe '{recipe}' for {command}; "
                              f"choose from {sorted(RECIPES[command])}")
        # recipe values sit between the defaults and the user's own keys
        cfg = _merge(_merge(DEFAULTS[command], RECIPES[command][recipe]), body)
    cfg = NORMALISE[command](cfg)
    return {"command": command, "config": cfg, "seed": seed, "format": fmt,
            "version": __version__}


def _integrator(d: dict, where="integrator") -> IntegratorConfig:
    try:
        return IntegratorConfig.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {_reason(exc)}") from exc


def _reason(exc) -> str:
    return exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)


def _pathway(d, where="pathway") -> PathwaySpec:
    if not isinstance(d, dict):
        raise ConfigError(f"'{where}' must be an object")
    try:
        return PathwaySpec.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {_reason(exc)}") from exc


def _edge(d, where="edge") -> EdgeParams:
    try:
        return EdgeParams(float(d["alpha"]), float(d["beta"]), float(d["phi"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {_reason(exc)}") from exc


def _floats(values, where) -> list[float]:
    if not isinstance(values, list):
        raise ConfigError(f"'{where}' must be a list")
    try:
        return [float(v) for v in values]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"'{where}': {exc}") from exc


def _positive_int(v, where) -> int:
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise ConfigError(f"'{where}' must be a positive integer, got {v!r}")
    return v


def _check_exclusive(cfg, keys):
    """Exactly one of ``keys`` must be set, or else a recipe and none of them."""
    given = [k for k in keys if cfg.get(k) is not None]
    if cfg.get("recipe") is not None:
        if given:
            raise ConfigError(f"recipe '{cfg['recipe']}' cannot be combined with "
                              f"'{given[0]}'")
        return
    if len(given) != 1:
        raise ConfigError(f"exactly one of {', '.join(repr(k) for k in keys)} is required")


def _norm_simulate(cfg):
    _check_exclusive(cfg, ["pathway"])
    integ = _integrator(cfg["integrator"])
    cfg["integrator"] = integ.to_dict()
    if cfg["pathway"] is not None:
        cfg["pathway"] = _pathway(cfg["pathway"]).to_dict()
    snaps = _floats(cfg["snapshots"], "snapshots")
    for t in snaps:
        k = t / integ.sample_dt
        if t < 0 or t > integ.t_end or abs(k - round(k)) > 1e-9:
            raise ConfigError(f"snapshot time {t:g} is not a sample time in "
                              f"[0, {integ.t_end:g}] with step {integ.sample_dt:g}")
    cfg["snapshots"] = snaps
    cfg["digits"] = _positive_int(cfg["digits"], "digits")
    return cfg


def _norm_stationary(cfg):
    e = _edge(cfg["edge"])
    cfg["edge"] = {"alpha": e.alpha, "beta": e.beta, "phi": e.phi}
    cfg["x0"] = float(cfg["x0"])
    cfg["n"] = _positive_int(cfg["n"], "n")
    if not isinstance(cfg["fit"], bool):
        raise ConfigError("'fit' must be true or false")
    return cfg


def _norm_wavespeed(cfg):
    _check_exclusive(cfg, ["pathway"])
    cfg["integrator"] = _integrator(cfg["integrator"]).to_dict()
    if cfg["pathway"] is not None:
        cfg["pathway"] = _pathway(cfg["pathway"]).to_dict()
    cfg["B_values"] = _floats(cfg["B_values"], "B_values")
    if any(not B > 1 for B in cfg["B_values"]):
        raise ConfigError("'B_values' must all exceed 1")
    cfg["phi_points"] = _positive_int(cfg["phi_points"], "phi_points")
    cfg["n"] = _positive_int(cfg["n"], "n")
    for key in ("phi_margin", "alpha", "series_t_end"):
        cfg[key] = float(cfg[key])
    if not cfg["alpha"] > 0:
        raise ConfigError("'alpha' must be positive")
    return cfg


def _gradient_from(d) -> GradientSpec:
    if not isinstance(d, dict):
        raise ConfigError("'gradient' must be an object")
    allowed = {"kind", "lo", "hi", "base", "n", "x0", "initial"}
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown key 'gradient.{sorted(unknown)[0]}'")
    try:
        kind = GradientKind(d["kind"])
        return GradientSpec(kind, float(d["lo"]), float(d["hi"]),
                            _edge({"phi": 0.0, **d["base"]}, "gradient.base"),
                            int(d.get("n", 200)), float(d.get("x0", 1.0)),
                            float(d.get("initial", -1.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"gradient: {_reason(exc)}") from exc


ENSEMBLE_KEYS = ("sigma", "alpha0", "beta0", "phi", "n")


def _ensemble_from(d, seed, realizations=1, with_sigma=True) -> StochasticEnsembleSpec:
    if not isinstance(d, dict):
        raise ConfigError("'ensemble' must be an object")
    keys = set(ENSEMBLE_KEYS) if with_sigma else set(ENSEMBLE_KEYS) - {"sigma"}
    if not with_sigma:
        keys.add("realizations")
    unknown = set(d) - keys
    if unknown:
        raise ConfigError(f"unknown key 'ensemble.{sorted(unknown)[0]}'")
    try:
        kw = {k: float(d[k]) for k in ("alpha0", "beta0", "phi") if k in d}
        if with_sigma and "sigma" in d:
            kw["sigma"] = float(d["sigma"])
        if "n" in d:
            kw["n"] = _positive_int(d["n"], "ensemble.n")
        if "realizations" in d:
            realizations = _positive_int(d["realizations"], "ensemble.realizations")
        return StochasticEnsembleSpec(**kw, realizations=realizations, seed=seed)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"ensemble: {exc}") from exc


def _ensemble_dict(s: StochasticEnsembleSpec, with_sigma=True) -> dict:
    d = {"alpha0": s.alpha0, "beta0": s.beta0, "phi": s.phi, "n": s.n}
    if with_sigma:
        d["sigma"] = s.sigma
    else:
        d["realizations"] = s.realizations
    return d


def _norm_rescale(cfg):
    # recipes only fill in a gradient or ensemble section
    given = [k for k in ("pathway", "gradient", "ensemble") if cfg[k] is not None]
    if len(given) != 1:
        raise ConfigError("exactly one of 'pathway', 'gradient', 'ensemble' is required")
    if cfg["pathway"] is not None:
        cfg["pathway"] = _pathway(cfg["pathway"]).to_dict()
    if cfg["gradient"] is not None:
        cfg["gradient"] = _gradient_dict(_gradient_from(cfg["gradient"]))
    if cfg["ensemble"] is not None:
        cfg["ensemble"] = _ensemble_dict(_ensemble_from(cfg["ensemble"], 0))
    if not isinstance(cfg["realization"], int) or cfg["realization"] < 0:
        raise ConfigError("'realization' must be a non-negative integer")
    o = cfg["oracle"]
    if o["mode"] not in ("exact", "table"):
        raise ConfigError("'oracle.mode' must be 'exact' or 'table'")
    o["n_B"] = _positive_int(o["n_B"], "oracle.n_B")
    o["n_u"] = _positive_int(o["n_u"], "oracle.n_u")
    o["margin"] = float(o["margin"])
    cfg["integrator"] = _integrator(cfg["integrator"]).to_dict()
    for key in ("full_series", "write_trajectory"):
        if not isinstance(cfg[key], bool):
            raise ConfigError(f"'{key}' must be true or false")
    return cfg


def _norm_sweep(cfg):
    cfg["ensemble"] = _ensemble_dict(_ensemble_from(cfg["ensemble"], 0, with_sigma=False),
                                     with_sigma=False)
    cfg["sigma_grid"] = _floats(cfg["sigma_grid"], "sigma_grid")
    if any(not 0.0 <= g <= 1.0 for g in cfg["sigma_grid"]):
        raise ConfigError("'sigma_grid' values must lie in [0, 1]")
    cfg["table"]["n_B"] = _positive_int(cfg["table"]["n_B"], "table.n_B")
    cfg["table"]["margin"] = float(cfg["table"]["margin"])
    cfg["integrator"] = _integrator(cfg["integrator"]).to_dict()
    return cfg


NORMALISE = {"simulate": _norm_simulate, "stationary": _norm_stationary,
             "wavespeed": _norm_wavespeed, "rescale": _norm_rescale, "sweep": _norm_sweep}


# ---------------------------------------------------------------- commands
# Each command returns {file name: text}; CSV tables use the .csv suffix and are
# converted to JSON records when --format json is requested.

def _snapshot_csv(x, digits) -> str:
    buf = io.StringIO()
    buf.write("i,x_i\n")
    for i, v in enumerate(x, start=1):
        buf.write(f"{i},{v:.{digits}g}\n")
    return buf.getvalue()


def _simulate_one(spec, integ, snaps, digits, prefix, files):
    traj = integrate(spec, integ)
    files[f"{prefix}trajectory.csv"] = traj.to_csv(digits)
    for t in snaps:
        j = int(np.argmin(np.abs(traj.t - t)))
        if abs(traj.t[j] - t) > 1e-9 * max(1.0, t):
            raise IntegrationError(f"run ended before snapshot t={t:g}", float(traj.t[-1]))
        files[f"{prefix}snapshot_t{t:g}.csv"] = _snapshot_csv(traj.x[j], digits)
    return traj


def cmd_simulate(cfg, seed, threads=1):
    integ = IntegratorConfig.from_dict(cfg["integrator"])
    files = {}
    if cfg["recipe"] == "fig4":
        for name, (phi, init, x0) in FIG4_PANELS.items():
            p = EdgeParams(1.0, 1.5, phi)
            spec = PathwaySpec.uniform(200, p, x0, init)
            log.info("fig4 panel %s: phi=%g initial=%g x0=%g", name, phi, init, x0)
            _simulate_one(spec, integ, cfg["snapshots"], cfg["digits"], f"{name}_", files)
            files[f"{name}_stationary.csv"] = stationary_profile(x0, p, 200).to_csv()
    else:
        spec = PathwaySpec.from_dict(cfg["pathway"])
        _simulate_one(spec, integ, cfg["snapshots"], cfg["digits"], "", files)
    return files


def _fmt(v) -> str:
    """Shortest text that round-trips the float; empty for missing values."""
    return "" if v is None else repr(float(v))


def _depth_row(prof) -> str:
    r = prof.report()
    keys = ("B", "phi", "x0", "lambda", "delta_i_approx", "delta_i_fit")
    return ",".join(_fmt(r[k]) for k in keys) + "\n"


DEPTH_HEADER = "B,phi,x0,lambda,delta_i_approx,delta_i_fit\n"


def cmd_stationary(cfg, seed, threads=1):
    files = {}
    if cfg["recipe"] == "fig6":
        alpha, n = cfg["edge"]["alpha"], cfg["n"]
        table = DEPTH_HEADER
        for B in FIG6_B:
            for x0 in FIG6_X0:
                prof = stationary_profile(x0, EdgeParams.from_B(alpha, B, 0.0), n,
                                          fit=cfg["fit"])
                files[f"profile_B{B:g}_x0{x0:g}.csv"] = prof.to_csv()
                table += _depth_row(prof)
        files["depths.csv"] = table
        return files
    p = EdgeParams(**cfg["edge"])
    prof = stationary_profile(cfg["x0"], p, cfg["n"], fit=cfg["fit"])
    files["profile.csv"] = prof.to_csv()
    files["report.json"] = json.dumps(prof.report(), indent=2, sort_keys=True) + "\n"
    return files


def _speed_of(spec, integ):
    require_region2(spec)
    c, traj = asymptotic_speed(spec, integ, return_trajectory=True)
    return c, traj


def cmd_wavespeed(cfg, seed, threads=1):
    integ = IntegratorConfig.from_dict(cfg["integrator"])
    files = {}
    if cfg["recipe"] == "fig5":
        alpha, n = cfg["alpha"], cfg["n"]
        buf = io.StringIO()
        buf.write("B,phi,phi_over_phi_c,alpha,speed\n")
        for B in cfg["B_values"]:
            for phi in bistable_window(B, cfg["phi_points"], cfg["phi_margin"]):
                spec = PathwaySpec.uniform(n, EdgeParams.from_B(alpha, B, float(phi)), 1.0, -1.0)
                c, _ = _speed_of(spec, integ)
                log.info("fig5 B=%g phi=%.4f speed=%.6g", B, phi, c)
                buf.write(",".join(_fmt(v) for v in (B, phi, phi * B, alpha, c)) + "\n")
        files["speed_table.csv"] = buf.getvalue()
        # panel (a): transient speed over the first time units at B = 3, phi = 0
        spec = PathwaySpec.uniform(n, EdgeParams.from_B(alpha, 3.0, 0.0), 1.0, -1.0)
        _, traj = _speed_of(spec, integ)
        stop = int(np.searchsorted(traj.t, cfg["series_t_end"], side="right"))
        files["velocity_B3.csv"] = velocity_series(traj, original_positions(n),
                                                   stop=stop).to_csv()
        return files
    spec = PathwaySpec.from_dict(cfg["pathway"])
    c, traj = _speed_of(spec, integ)
    files["velocity.csv"] = velocity_series(traj, original_positions(spec.n)).to_csv()
    files["speed.json"] = json.dumps({"speed": c, "arrival_time": traj.arrival_time,
                                      "nodes": spec.n}, indent=2, sort_keys=True) + "\n"
    return files


def _rescale_spec(cfg, seed) -> PathwaySpec:
    if cfg["pathway"] is not None:
        return PathwaySpec.from_dict(cfg["pathway"])
    if cfg["gradient"] is not None:
        return build_gradient(_gradient_from(cfg["gradient"]))
    s = _ensemble_from(cfg["ensemble"], seed)
    return sample_realization(s, cfg["realization"])


def cmd_rescale(cfg, seed, threads=1):
    spec = _rescale_spec(cfg, seed)
    o = cfg["oracle"]
    if o["mode"] == "table":
        oracle = SpeedOracle(Mode.Table, table_for_pathway(spec, o["n_B"], o["n_u"], o["margin"]))
    else:
        oracle = SpeedOracle(Mode.Exact)
    integ = IntegratorConfig.from_dict(cfg["integrator"])
    coords = rescale(spec, oracle)
    cmp = run_comparison(spec, oracle, integ, coords, full_series=cfg["full_series"])
    files = {
        "coordinates.csv": coords.to_csv(),
        "velocity_original.csv": cmp.original.velocity.to_csv(),
        "velocity_rescaled.csv": cmp.rescaled.velocity.to_csv(),
        "residual_original.csv": cmp.original.residual.to_csv(),
        "residual_rescaled.csv": cmp.rescaled.residual.to_csv(),
    }
    if cfg["write_trajectory"]:
        files["trajectory.csv"] = cmp.trajectory.to_csv()

    def cv(v):
        w = v.window(cmp.t_start, math.inf).values
        return float(np.std(w) / np.mean(w))

    summary = {
        "t_start": cmp.t_start, "t_J": cmp.t_J, "t_end": cmp.t_end, "c_bar": coords.c_bar,
        "vise_original": cmp.original.vise, "vise_rescaled": cmp.rescaled.vise,
        "rise_original": cmp.original.rise, "rise_rescaled": cmp.rescaled.rise,
        "cv_original": cv(cmp.original.velocity), "cv_rescaled": cv(cmp.rescaled.velocity),
    }
    files["summary.json"] = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    return files


def cmd_sweep(cfg, seed, threads=1):
    e = cfg["ensemble"]
    s = StochasticEnsembleSpec(alpha0=e["alpha0"], beta0=e["beta0"], phi=e["phi"], n=e["n"],
                               realizations=e["realizations"], seed=seed)
    integ = IntegratorConfig.from_dict(cfg["integrator"])

    def progress(sigma, recs):
        bad = sum(r["excluded"] for r in recs)
        log.info("sigma=%g done, %d/%d excluded", sigma, bad, len(recs))

    summary = sweep(s, cfg["sigma_grid"], None, integ, threads, progress,
                    n_B=cfg["table"]["n_B"], margin=cfg["table"]["margin"])
    return {"summary.csv": summary.to_csv(), "extrema.csv": summary.extrema_csv(),
            "details.jsonl": summary.details_jsonl()}


RUNNERS = {"simulate": cmd_simulate, "stationary": cmd_stationary,
           "wavespeed": cmd_wavespeed, "rescale": cmd_rescale, "sweep": cmd_sweep}


# ---------------------------------------------------------------- driver

def render(files: dict, fmt: str) -> dict:
    """Apply the output format: CSV tables become JSON record lists."""
    if fmt == "csv":
        return dict(files)
    out = {}
    for name, text in files.items():
        if name.endswith(".csv"):
            out[name[:-4] + ".json"] = json.dumps(csv_to_records(text), indent=1) + "\n"
        else:
            out[name] = text
    return out


def run(manifest: dict, out: Path, threads: int = 1) -> dict:
    files = RUNNERS[manifest["command"]](manifest["config"], manifest["seed"], threads)
    files = render(files, manifest["format"])
    files["manifest.json"] = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    for name in sorted(files):
        write_atomic(out / name, files[name])
    return files


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config or a manifest.json from an earlier run")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, help="seed for all random draws (default 0)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for sweep")
    common.add_argument("--format", choices=("csv", "json"), help="table format (default csv)")
    common.add_argument("-v", "--verbose", action="count", default=0)
    ap = argparse.ArgumentParser(prog="cascadewave", description=__doc__.splitlines()[0],
                                 parents=[common])
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "integrate a pathway and write its trajectory",
        "stationary": "iterate the stationary map and fit penetration depth",
        "wavespeed": "measure front speeds",
        "rescale": "compare original and rescaled frames for a heterogeneous pathway",
        "sweep": "VISE/RISE statistics over a lognormal ensemble",
    }
    for name in COMMANDS:
        sub.add_parser(name, help=helps[name], parents=[common])
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        manifest = resolve(args.command, load_document(args.config), args.seed, args.format)
        files = run(manifest, Path(args.out), args.threads)
    except (ConfigError, DomainError, SeparatrixError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoPropagation, NoHomogeneousWave, NoCrossing, EnsembleFailure) as exc:
        print(f"propagation failure: {exc}", file=sys.stderr)
        return EXIT_PROPAGATION
    except (IntegrationError, TailNotConverged, WindowTooShort, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    log.info("wrote %d files to %s", len(files), args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
