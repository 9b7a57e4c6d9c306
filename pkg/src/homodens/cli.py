"""Command-line entry point.

Sub-commands::

    homodens simulate   CONFIG -o DIR [--raw]
    homodens estimate   (--config CONFIG | --traj FILE [--config CONFIG]) -o DIR [-N N] [--truth]
    homodens infer-eps  COEFFS -o DIR [--L L] [--xi-max X] [--grid-step D] [--exclusion-radius R]
    homodens experiment {fig1,fig2,fig3} -o DIR [--scale-T S] [--jobs J] [--seed SEED]

Every command writes one ``manifest.json`` into its output directory.
Exit status: 0 success, 2 configuration error, 3 numerical failure,
4 no dominant frequency.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import os
import sys
import time

import jsonschema
import numpy as np

from . import __version__
from .estimator import (
    coeff_observer,
    eval_density,
    eval_density_grid,
    load_coeffs,
    save_coeffs,
)
from .experiments import EXPERIMENTS, GRID_1D, GRID_2D, write_columns
from .model import CatalogError, DivergenceError, problem_from_names, reference_density
from .numerics import Grid1D, Grid2D, NumericalError, l2_error
from .sim import PRNG_IDENTITY, SimConfig, euler_maruyama, read_trajectory, simulate_to_file
from .spectral import NoDominantFrequency, dominant_frequency, infer_eps, scan_spectrum, write_scan

__all__ = ["ConfigError", "CONFIG_SCHEMA", "load_config", "RunManifest", "main"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_NO_PEAK = 0, 2, 3, 4

_NUMBER = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
CONFIG_SCHEMA = {
    "type": "object",
    "required": ["potential", "eps", "sigma2", "T", "seed"],
    "additionalProperties": False,
    "properties": {
        "potential": {"type": "string"},
        "fast": {"type": "string"},
        "params": {"type": "object", "additionalProperties": _NUMBER},
        "eps": _POS,
        "sigma2": _POS,
        "L": _POS,
        "T": _POS,
        "h": {"anyOf": [{"const": "auto"}, _POS]},
        "seed": {"type": "integer", "minimum": 0},
        "N": {"type": "integer", "minimum": 1},
        "x0": {"anyOf": [_NUMBER, {"type": "array", "items": _NUMBER, "minItems": 1, "maxItems": 2}]},
        "burn_in": {"type": "number", "minimum": 0},
        "mode": {"enum": ["multiscale", "homogenized"]},
        "grid": {
            "type": "object",
            "required": ["lo", "hi", "count"],
            "additionalProperties": False,
            "properties": {"lo": _NUMBER, "hi": _NUMBER, "count": {"type": "integer", "minimum": 2}},
        },
    },
}


class ConfigError(ValueError):
    """Invalid configuration; `field` names the offending entry."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


def validate_config(cfg):
    """Check `cfg` against :data:`CONFIG_SCHEMA`; raise :class:`ConfigError`."""
    errors = sorted(jsonschema.Draft7Validator(CONFIG_SCHEMA).iter_errors(cfg), key=lambda e: list(e.path))
    if not errors:
        return cfg
    err = errors[0]
    prefix = "".join(f"{p}." for p in err.path)
    if err.validator == "required":
        field = prefix + next(f for f in err.validator_value if f not in err.instance)
        msg = f"missing required field {field!r}"
    elif err.validator == "additionalProperties":
        field = prefix + sorted(set(err.instance) - set(err.schema.get("properties", {})))[0]
        msg = f"unknown field {field!r}"
    else:
        field = prefix.rstrip(".") or None
        msg = f"invalid value for {field!r}: {err.message}"
    raise ConfigError(msg, field)


def load_config(path):
    """Read and validate a config file.

    A manifest written by this tool is accepted too; its config snapshot
    is used, so a run can be repeated from its own manifest.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if isinstance(data, dict) and data.get("tool") == "homodens" and "config" in data:
        data = data["config"]
    return validate_config(data)


def _problem(cfg):
    return problem_from_names(
        cfg["potential"], cfg.get("fast"), eps=cfg["eps"], sigma2=cfg["sigma2"],
        L=cfg.get("L", 2.0 * math.pi), x0=cfg.get("x0", 0.0), **cfg.get("params", {}),
    )


def _sim_config(cfg):
    h = cfg.get("h", "auto")
    return SimConfig(T=cfg["T"], h=None if h == "auto" else float(h), seed=cfg["seed"],
                     burn_in=cfg.get("burn_in", 0.0))


def _grid(cfg, dim):
    g = cfg.get("grid") if cfg else None
    if g is None:
        return GRID_1D if dim == 1 else GRID_2D
    axis = Grid1D(float(g["lo"]), float(g["hi"]), int(g["count"]))
    return axis if dim == 1 else Grid2D(axis, axis)


def _grid_json(grid):
    if isinstance(grid, Grid2D):
        return {"x1": _grid_json(grid.x1), "x2": _grid_json(grid.x2)}
    return {"lo": grid.lo, "hi": grid.hi, "count": grid.count}


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class RunManifest:
    """Provenance record written as ``manifest.json`` in an output directory."""

    NAME = "manifest.json"

    def __init__(self, command, config=None, argv=None):
        self.data = {
            "tool": "homodens",
            "version": __version__,
            "prng": PRNG_IDENTITY,
            "command": command,
            "argv": list(argv or []),
            "config": config,
            "started": _now(),
            "finished": None,
            "outputs": {},
            "results": {},
        }

    def finish(self, out_dir, outputs, **results):
        self.data["finished"] = _now()
        self.data["outputs"] = {name: _sha256(os.path.join(out_dir, name)) for name in sorted(outputs)}
        self.data["results"].update(results)
        path = os.path.join(out_dir, self.NAME)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.data, fh, indent=1, default=_json_default)
            fh.write("\n")
        return path


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _out_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args):
    cfg = load_config(args.config)
    spec, sim = _problem(cfg), _sim_config(cfg)
    out = _out_dir(args.out)
    name = "trajectory.bin" if args.raw else "trajectory.csv"
    manifest = RunManifest("simulate", cfg, args.argv)
    t0 = time.perf_counter()
    summary = simulate_to_file(spec, sim, cfg.get("mode", "multiscale"), os.path.join(out, name), raw=args.raw)
    wall = time.perf_counter() - t0
    manifest.finish(out, [name], summary=summary.to_dict(), wall_time=wall)
    print(f"simulate: {summary.steps} steps, {summary.emitted} rows, h={summary.h:g}, "
          f"wall {wall:.2f}s -> {os.path.join(out, name)}")
    return EXIT_OK


def _estimate_from_file(path, N, burn_in=0.0):
    header, chunks = read_trajectory(path)
    obs = coeff_observer(N, header["dim"])
    for t, x in chunks:
        if burn_in > 0:
            keep = t >= burn_in
            t, x = t[keep], x[keep]
            if not len(t):
                continue
        obs.update(t, x)
    return obs.finalize(h=header["h"], seed=header["seed"])


def cmd_estimate(args):
    cfg = load_config(args.config) if args.config else None
    N = args.N if args.N is not None else (cfg or {}).get("N")
    if N is None:
        raise ConfigError("missing required field 'N' (give -N or set it in the config)", "N")
    if N < 1:
        raise ConfigError(f"N must be at least 1, got {N}", "N")
    if args.truth and cfg is None:
        raise ConfigError("--truth needs --config to define the model", "config")
    if args.traj is None and cfg is None:
        raise ConfigError("give a trajectory (--traj) or a config (--config)", "config")

    spec = _problem(cfg) if cfg else None
    manifest = RunManifest("estimate", cfg, args.argv)
    if args.traj is not None:
        est = _estimate_from_file(args.traj, N, (cfg or {}).get("burn_in", 0.0))
        if spec is not None:
            est.eps, est.potential = spec.eps, spec.name
        if cfg is not None:
            est.T = cfg["T"]
    else:
        sim = _sim_config(cfg)
        obs = coeff_observer(N, spec.dim)
        summary = euler_maruyama(spec, sim, cfg.get("mode", "multiscale"), observers=[obs])
        est = obs.finalize(T=cfg["T"], eps=spec.eps, seed=sim.seed, potential=spec.name)
        manifest.data["results"]["summary"] = summary.to_dict()

    out = _out_dir(args.out)
    save_coeffs(est, os.path.join(out, "coeffs.json"))
    grid = _grid(cfg, est.dim)
    results = {"grid": _grid_json(grid), "N": N}
    if est.dim == 1:
        x = grid.points()
        cols, names = [x, eval_density(est, x)], ["x", "rho_hat"]
        if args.truth:
            rho, rho_eps = reference_density(spec, "rho")(x), reference_density(spec, "rho_eps")(x)
            cols += [rho, rho_eps]
            names += ["rho", "rho_eps"]
            results["l2_rho"] = l2_error(cols[1], rho, grid)
            results["l2_rho_eps"] = l2_error(cols[1], rho_eps, grid)
    else:
        X1, X2 = grid.mesh()
        vals = eval_density_grid(est, grid.x1.points(), grid.x2.points())
        cols, names = [X1, X2, vals], ["x1", "x2", "rho_hat"]
        if args.truth:
            rho = reference_density(spec, "rho")(X1, X2)
            rho_eps = reference_density(spec, "rho_eps")(X1, X2)
            cols += [rho, rho_eps]
            names += ["rho", "rho_eps"]
            results["l2_rho"] = l2_error(vals, rho, grid)
            results["l2_rho_eps"] = l2_error(vals, rho_eps, grid)
    write_columns(os.path.join(out, "density.csv"), names, cols)
    manifest.finish(out, ["coeffs.json", "density.csv"], **results)
    msg = f"estimate: N={N}, {est.samples} samples -> {out}"
    if args.truth:
        msg += f"; L2 vs rho {results['l2_rho']:.4g}, vs rho_eps {results['l2_rho_eps']:.4g}"
    print(msg)
    return EXIT_OK


def cmd_infer_eps(args):
    try:
        est = load_coeffs(args.coeffs)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"{args.coeffs}: unreadable coefficient file ({exc})", "coeffs") from None
    if est.dim != 1:
        raise ConfigError("scale inference needs a one-dimensional coefficient vector", "coeffs")
    out = _out_dir(args.out)
    kw = dict(xi_max=args.xi_max, grid_step=args.grid_step, exclusion_radius=args.exclusion_radius, L=args.L)
    scan = scan_spectrum(est, **kw)
    side = write_scan(scan, os.path.join(out, "scan.csv"), L=args.L)
    manifest = RunManifest("infer-eps", {"coeffs": os.path.abspath(args.coeffs), **kw}, args.argv)
    top = [vars(p) for p in scan.top_peaks]
    try:
        dom = dominant_frequency(est, **kw)
    except NoDominantFrequency as exc:
        manifest.finish(out, ["scan.csv", os.path.basename(side)], xi_bar=None, eps_hat=None, top_peaks=top)
        print(f"infer-eps: {exc}; try a larger N", file=sys.stderr)
        return EXIT_NO_PEAK
    eps_hat = infer_eps(dom.xi_bar, args.L)
    manifest.finish(out, ["scan.csv", os.path.basename(side)], xi_bar=dom.xi_bar, eps_hat=eps_hat,
                    peak_ratio=dom.peak_ratio, top_peaks=top)
    print(json.dumps({"xi_bar": dom.xi_bar, "eps_hat": eps_hat, "peak_ratio": dom.peak_ratio}))
    return EXIT_OK


def cmd_experiment(args):
    out = _out_dir(args.out)
    run = EXPERIMENTS[args.name]
    manifest = RunManifest(f"experiment {args.name}",
                           {"name": args.name, "scale_T": args.scale_T, "seed": args.seed}, args.argv)
    t0 = time.perf_counter()
    rows, outputs = run(out, scale_T=args.scale_T, jobs=args.jobs, base_seed=args.seed)
    table = [{k: v for k, v in r.items() if k != "maxima"} for r in rows]
    keys = list(table[0])
    with open(os.path.join(out, "summary.csv"), "w", encoding="utf-8") as fh:
        fh.write(",".join(keys) + "\n")
        for r in table:
            fh.write(",".join("" if r[k] is None else repr(r[k]) if isinstance(r[k], float) else str(r[k])
                              for k in keys) + "\n")
    manifest.finish(out, [*outputs, "summary.csv"], rows=rows, wall_time=time.perf_counter() - t0)
    for r in table:
        print("  ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in r.items()))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="homodens", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"homodens {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a trajectory to a file")
    p.add_argument("config")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--raw", action="store_true", help="raw little-endian float64 records instead of CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="Hermite coefficients and density on a grid")
    p.add_argument("--config")
    p.add_argument("--traj", help="trajectory file (otherwise simulate in memory from --config)")
    p.add_argument("-N", type=int)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--truth", action="store_true", help="add rho and rho_eps columns and L2 errors")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("infer-eps", help="infer eps from the dominant non-zero frequency")
    p.add_argument("coeffs")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--L", type=float, default=2.0 * math.pi)
    p.add_argument("--xi-max", type=float)
    p.add_argument("--grid-step", type=float)
    p.add_argument("--exclusion-radius", type=float)
    p.set_defaults(func=cmd_infer_eps)

    p = sub.add_parser("experiment", help="run a reference experiment grid")
    p.add_argument("name", choices=sorted(EXPERIMENTS))
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--scale-T", type=float, default=1.0, help="multiply every horizon by this factor")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    try:
        return args.func(args)
    except (ConfigError, CatalogError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, DivergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
