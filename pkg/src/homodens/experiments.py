"""Runners for the three reference experiments.

Each runner simulates its grid of cells (one trajectory per cell, seeded
``base_seed ^ cell_index``), writes plot-ready CSV files into an output
directory and returns a summary table as a list of dicts.  Estimates for
several N come from one trajectory: the coefficient averages do not depend
on the truncation, so the N-term estimate is a prefix of the largest one.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np
from scipy import ndimage

from .estimator import coeff_observer, eval_density, eval_density_grid, save_coeffs
from .model import problem_from_names, reference_density
from .numerics import Grid1D, Grid2D, l2_error
from .sim import SimConfig, euler_maruyama
from .spectral import NoDominantFrequency, dominant_frequency, infer_eps, scan_spectrum, write_scan

__all__ = [
    "DEFAULT_SEED",
    "FIG1",
    "FIG2",
    "FIG3",
    "GRID_1D",
    "GRID_2D",
    "write_columns",
    "local_maxima",
    "run_fig1",
    "run_fig2",
    "run_fig3",
    "EXPERIMENTS",
]

DEFAULT_SEED = 1
GRID_1D = Grid1D(-2.5, 2.5, 1001)
GRID_2D = Grid2D(Grid1D(-2.0, 2.0, 201), Grid1D(-2.0, 2.0, 201))

FIG1 = {"potential": "double-well", "fast": "cos", "eps": 0.1, "sigma2": 1.0,
        "T": (50.0, 500.0, 5000.0), "N": (4, 16, 64)}
FIG2 = {"potential": "double-well", "fast": "cos", "eps": (0.075, 0.1, 0.125), "sigma2": 1.0,
        "T": 1000.0, "N": (30, 60, 90)}
FIG3 = {"potential": "2d-example", "fast": "sin+sin2", "eps": 0.1, "sigma2": 2.25,
        "T": 2000.0, "N": 16}


def write_columns(path, names, columns):
    """CSV with a header line and ``%.17g`` values (byte-stable for equal input)."""
    block = np.column_stack([np.asarray(c, dtype=float).ravel() for c in columns])
    np.savetxt(path, block, fmt="%.17g", delimiter=",", header=",".join(names), comments="")


def _map(fn, items, jobs):
    if jobs <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _run_cell(spec, T, seed, N):
    obs = coeff_observer(N, spec.dim)
    summary = euler_maruyama(spec, SimConfig(T=T, seed=seed), observers=[obs])
    est = obs.finalize(T=T, eps=spec.eps, seed=seed, potential=spec.name)
    return est, summary


def _prefix(est, N):
    coeffs = est.coeffs[:N] if est.dim == 1 else est.coeffs[:N, :N]
    return replace(est, coeffs=coeffs, N=N)


def run_fig1(out_dir, scale_T=1.0, jobs=1, base_seed=DEFAULT_SEED, grid=GRID_1D):
    """Density estimates for T x N on the double well with a cosine fast part.

    Writes ``fig1_T<T>_N<N>.csv`` with columns ``x,rho_hat,rho,rho_eps``
    and returns rows ``{T, N, seed, l2_rho, l2_rho_eps}``.
    """
    spec = problem_from_names(FIG1["potential"], FIG1["fast"], eps=FIG1["eps"], sigma2=FIG1["sigma2"])
    rho = reference_density(spec, "rho")
    rho_eps = reference_density(spec, "rho_eps")
    x = grid.points()
    rv, rev = rho(x), rho_eps(x)
    n_max = max(FIG1["N"])
    horizons = [T * scale_T for T in FIG1["T"]]

    def cell(i):
        return _run_cell(spec, horizons[i], base_seed ^ i, n_max)

    rows, outputs = [], []
    for i, (est, _) in enumerate(_map(cell, range(len(horizons)), jobs)):
        for N in FIG1["N"]:
            vals = eval_density(_prefix(est, N), x)
            name = f"fig1_T{horizons[i]:g}_N{N}.csv"
            write_columns(os.path.join(out_dir, name), ("x", "rho_hat", "rho", "rho_eps"), (x, vals, rv, rev))
            outputs.append(name)
            rows.append({"T": horizons[i], "N": N, "seed": base_seed ^ i,
                         "l2_rho": l2_error(vals, rv, grid), "l2_rho_eps": l2_error(vals, rev, grid)})
    return rows, outputs


def run_fig2(out_dir, scale_T=1.0, jobs=1, base_seed=DEFAULT_SEED, L=2.0 * math.pi):
    """Frequency scans for eps x N and the inferred scale separation.

    Writes ``fig2_eps<eps>_coeffs.json`` (largest N) and
    ``fig2_eps<eps>_N<N>_scan.csv`` with its JSON sidecar; returns rows
    ``{eps, N, seed, xi_bar, eps_hat, peak_ratio}`` (``xi_bar`` and
    ``eps_hat`` are None when no dominant frequency is found).
    """
    n_max = max(FIG2["N"])
    T = FIG2["T"] * scale_T
    specs = [problem_from_names(FIG2["potential"], FIG2["fast"], eps=e, sigma2=FIG2["sigma2"], L=L)
             for e in FIG2["eps"]]

    def cell(i):
        return _run_cell(specs[i], T, base_seed ^ i, n_max)

    rows, outputs = [], []
    for i, (est, _) in enumerate(_map(cell, range(len(specs)), jobs)):
        eps = FIG2["eps"][i]
        name = f"fig2_eps{eps:g}_coeffs.json"
        save_coeffs(est, os.path.join(out_dir, name))
        outputs.append(name)
        for N in FIG2["N"]:
            sub = _prefix(est, N)
            scan = scan_spectrum(sub, L=L)
            name = f"fig2_eps{eps:g}_N{N}_scan.csv"
            side = write_scan(scan, os.path.join(out_dir, name), L=L)
            outputs += [name, os.path.basename(side)]
            try:
                dom = dominant_frequency(sub, L=L)
                xi_bar, eps_hat, ratio = dom.xi_bar, infer_eps(dom.xi_bar, L), dom.peak_ratio
            except NoDominantFrequency:
                best = scan.best
                xi_bar, eps_hat, ratio = None, None, (best.ratio if best else None)
            rows.append({"eps": eps, "N": N, "seed": base_seed ^ i, "xi_bar": xi_bar,
                         "eps_hat": eps_hat, "peak_ratio": ratio})
    return rows, outputs


def local_maxima(values, x1, x2, rel_height=0.1):
    """Grid points that are maxima of their 3x3 neighbourhood and exceed
    `rel_height` times the global maximum, highest first, as ``(x1, x2, value)``."""
    v = np.asarray(values, dtype=float)
    peak = ndimage.maximum_filter(v, size=3, mode="nearest") == v
    peak &= v >= rel_height * v.max()
    # drop plateaus and boundary points
    peak[0, :] = peak[-1, :] = peak[:, 0] = peak[:, -1] = False
    idx = np.argwhere(peak)
    out = [(float(x1[i]), float(x2[j]), float(v[i, j])) for i, j in idx]
    return sorted(out, key=lambda t: -t[2])


def run_fig3(out_dir, scale_T=1.0, jobs=1, base_seed=DEFAULT_SEED, grid=GRID_2D):
    """Two-dimensional estimate on the tensor grid.

    Writes ``fig3_grid.csv`` with ``x1,x2,rho_hat,rho,rho_eps`` and returns
    one row with the L2 errors and the significant local maxima.
    """
    spec = problem_from_names(FIG3["potential"], FIG3["fast"], eps=FIG3["eps"], sigma2=FIG3["sigma2"])
    T = FIG3["T"] * scale_T
    seed = base_seed ^ 0
    est, _ = _run_cell(spec, T, seed, FIG3["N"])
    x1, x2 = grid.x1.points(), grid.x2.points()
    X1, X2 = grid.mesh()
    vals = eval_density_grid(est, x1, x2)
    rv = reference_density(spec, "rho")(X1, X2)
    rev = reference_density(spec, "rho_eps")(X1, X2)
    write_columns(os.path.join(out_dir, "fig3_grid.csv"), ("x1", "x2", "rho_hat", "rho", "rho_eps"),
                  (X1, X2, vals, rv, rev))
    save_coeffs(est, os.path.join(out_dir, "fig3_coeffs.json"))
    row = {"T": T, "N": FIG3["N"], "seed": seed, "l2_rho": l2_error(vals, rv, grid),
           "l2_rho_eps": l2_error(vals, rev, grid),
           "maxima": [list(m) for m in local_maxima(vals, x1, x2)]}
    return [row], ["fig3_grid.csv", "fig3_coeffs.json"]


EXPERIMENTS = {"fig1": run_fig1, "fig2": run_fig2, "fig3": run_fig3}
