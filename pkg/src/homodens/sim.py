"""Euler-Maruyama integration of the multiscale and homogenized SDEs.

States are produced chunk by chunk and pushed to observers, so a
trajectory never has to fit in memory.  The stepping loop is compiled with
numba; Gaussian increments come from numpy's PCG64 generator
(``numpy.random.default_rng(seed).standard_normal``, ziggurat transform).
Runs are bit-reproducible within one build for a fixed seed.
"""

from __future__ import annotations

import io
import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from itertools import islice

import numba
import numpy as np

from .model import DivergenceError, homogenize

__all__ = [
    "PRNG_IDENTITY",
    "STABILITY_MARGIN",
    "SimConfig",
    "SimSummary",
    "SimulationDivergence",
    "StepSizeWarning",
    "euler_maruyama",
    "run_ensemble",
    "TrajectoryWriter",
    "simulate_to_file",
    "read_trajectory",
    "load_trajectory",
]

log = logging.getLogger(__name__)

PRNG_IDENTITY = f"numpy-{np.__version__}/PCG64/standard_normal-ziggurat"
#: h must not exceed STABILITY_MARGIN * eps^2 when the fast potential is active.
STABILITY_MARGIN = 0.5
CHUNK = 1 << 16
MODES = ("multiscale", "homogenized")


class SimulationDivergence(DivergenceError):
    def __init__(self, step, last_state):
        super().__init__(
            f"non-finite state at step {step}; last finite state {list(last_state)}"
        )
        self.step = step
        self.last_state = tuple(last_state)


class StepSizeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Horizon, step, seed and burn-in of one run.

    ``h=None`` selects the default step ``eps**3``.
    """

    T: float
    h: float | None = None
    seed: int = 0
    burn_in: float = 0.0

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if self.h is not None and not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if self.burn_in < 0:
            raise ValueError(f"burn_in must be non-negative, got {self.burn_in}")

    def step(self, spec):
        return self.h if self.h is not None else spec.eps ** 3

    def n_steps(self, spec):
        # guard against eps**3 rounding just above the exact step
        return int(math.floor(self.T / self.step(spec) * (1.0 + 1e-12)))


@dataclass(frozen=True)
class SimSummary:
    mode: str
    dim: int
    T: float
    h: float
    steps: int
    emitted: int
    seed: int
    state_min: tuple
    state_max: tuple
    horizon_remainder: float
    prng: str = PRNG_IDENTITY

    def to_dict(self):
        return asdict(self)


@numba.njit(cache=True, nogil=True)
def _em_chunk(x, noise, out, h, inv_eps, vscale, dV, fa, fb, omega, noise_scale):
    m, d = noise.shape
    P = dV.shape[1]
    Kf = fa.shape[1]
    for k in range(m):
        for i in range(d):
            xi = x[i]
            g = 0.0
            for j in range(P - 1, -1, -1):
                g = g * xi + dV[i, j]
            drift = -vscale * g
            if Kf > 0:
                y = xi * inv_eps
                fp = 0.0
                for q in range(Kf):
                    kw = (q + 1) * omega[i]
                    fp += kw * (fb[i, q] * math.cos(kw * y) - fa[i, q] * math.sin(kw * y))
                drift -= fp * inv_eps
            xn = xi + drift * h + noise_scale * noise[k, i]
            if not math.isfinite(xn):
                return k
            x[i] = xn
            out[k, i] = xn
    return -1


def _kernel_params(spec, mode, hom):
    d = spec.dim
    dvs = [V.derivative_coeffs for V in spec.slow]
    P = max(len(c) for c in dvs)
    dV = np.zeros((d, P))
    for i, c in enumerate(dvs):
        dV[i, : len(c)] = c
    if mode == "multiscale":
        Kf = max(len(p.cos_coeffs) for p in spec.fast)
        fa, fb = np.zeros((d, Kf)), np.zeros((d, Kf))
        for i, p in enumerate(spec.fast):
            fa[i, : len(p.cos_coeffs)] = p.cos_coeffs
            fb[i, : len(p.sin_coeffs)] = p.sin_coeffs
        return dV, fa, fb, 1.0, spec.sigma2
    return dV, np.zeros((d, 0)), np.zeros((d, 0)), hom.K, hom.Sigma


def _check_step(spec, h, mode, user_step):
    if mode != "multiscale" or all(p.is_constant for p in spec.fast) or spec.testing:
        return
    eps2 = spec.eps ** 2
    if h > STABILITY_MARGIN * eps2:
        raise ValueError(
            f"step h={h:g} exceeds the stability limit {STABILITY_MARGIN}*eps^2={STABILITY_MARGIN * eps2:g}"
        )
    if user_step and h > eps2 / 10:
        warnings.warn(
            f"step h={h:g} > eps^2/10={eps2 / 10:g}; the fast drift is poorly resolved",
            StepSizeWarning,
            stacklevel=3,
        )


def euler_maruyama(spec, cfg, mode="multiscale", observers=(), homogenized=None, chunk=CHUNK):
    """Integrate one trajectory and stream it to `observers`.

    Every observer's ``update(times, states)`` is called with consecutive
    chunks in time order; ``states`` has shape ``(m,)`` in 1D and ``(m, 2)``
    in 2D.  The initial state at ``t = 0`` is the first sample, followed by
    the state after each of the ``floor(T/h)`` steps.  Samples with
    ``t < cfg.burn_in`` are withheld.

    Parameters
    ----------
    spec : ProblemSpec
    cfg : SimConfig
    mode : {"multiscale", "homogenized"}
        homogenized mode integrates ``dX = -K V'(X) dt + sqrt(2 Sigma) dW``
    observers : sequence
        objects with an ``update(times, states)`` method
    homogenized : HomogenizedModel, optional
        precomputed constants for homogenized mode

    Returns
    -------
    SimSummary

    Raises
    ------
    SimulationDivergence
        if a state overflows; carries the step index and last finite state.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "homogenized":
        if spec.dim != 1:
            raise NotImplementedError("homogenized mode needs the scalar K of a 1D problem")
        if homogenized is None:
            homogenized = homogenize(spec.fast[0], spec.L, spec.sigma2)
    h = cfg.step(spec)
    _check_step(spec, h, mode, cfg.h is not None)
    n_steps = cfg.n_steps(spec)
    d = spec.dim
    dV, fa, fb, vscale, diff = _kernel_params(spec, mode, homogenized)
    omega = np.array([p.omega for p in spec.fast])
    noise_scale = math.sqrt(2.0 * diff * h)
    inv_eps = 1.0 / spec.eps
    rng = np.random.default_rng(cfg.seed)

    x = np.array(spec.x0, dtype=float)
    lo, hi = x.copy(), x.copy()
    emitted = 0

    def emit(k0, states):
        nonlocal emitted
        times = np.arange(k0, k0 + len(states)) * h
        if cfg.burn_in > 0:
            keep = times >= cfg.burn_in
            if not keep.any():
                return
            times, states = times[keep], states[keep]
        payload = states[:, 0] if d == 1 else states
        for obs in observers:
            obs.update(times, payload)
        emitted += len(times)

    emit(0, x[None, :].copy())
    k = 0
    while k < n_steps:
        m = min(chunk, n_steps - k)
        noise = rng.standard_normal((m, d))
        out = np.empty((m, d))
        start = x.copy()
        bad = _em_chunk(x, noise, out, h, inv_eps, vscale, dV, fa, fb, omega, noise_scale)
        if bad >= 0:
            last = out[bad - 1] if bad > 0 else start
            raise SimulationDivergence(k + bad + 1, last)
        lo = np.minimum(lo, out.min(axis=0))
        hi = np.maximum(hi, out.max(axis=0))
        emit(k + 1, out)
        k += m

    return SimSummary(
        mode=mode,
        dim=d,
        T=float(cfg.T),
        h=float(h),
        steps=n_steps,
        emitted=emitted,
        seed=int(cfg.seed),
        state_min=tuple(float(v) for v in lo),
        state_max=tuple(float(v) for v in hi),
        horizon_remainder=float(cfg.T - n_steps * h) if cfg.T - n_steps * h > 1e-12 * cfg.T else 0.0,
    )


def run_ensemble(spec, cfg, n_runs, make_observer, mode="multiscale", jobs=1):
    """Run `n_runs` independent trajectories with seeds ``cfg.seed ^ i``.

    ``make_observer()`` builds one fresh observer per run.  Returns the list
    of ``(observer, summary)`` pairs in run order; callers reduce them.
    """

    def one(i):
        obs = make_observer()
        run_cfg = SimConfig(T=cfg.T, h=cfg.h, seed=cfg.seed ^ i, burn_in=cfg.burn_in)
        return obs, euler_maruyama(spec, run_cfg, mode, [obs])

    if jobs <= 1:
        return [one(i) for i in range(n_runs)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, range(n_runs)))


# ---------------------------------------------------------------------------
# trajectory files

_MAGIC = "#homodens traj v1"


def _header(dim, h, seed, mode):
    return f"{_MAGIC} dim={dim} h={h!r} seed={seed} mode={mode}\n"


def _parse_header(line):
    if not line.startswith(_MAGIC):
        raise ValueError(f"not a homodens trajectory file (header {line.strip()!r})")
    fields = dict(tok.split("=", 1) for tok in line[len(_MAGIC):].split())
    return {
        "dim": int(fields["dim"]),
        "h": float(fields["h"]),
        "seed": int(fields["seed"]),
        "mode": fields["mode"],
    }


class TrajectoryWriter:
    """Observer that persists the stream as CSV (or raw little-endian f64)."""

    def __init__(self, path, dim, h, seed, mode, raw=False):
        self.path = os.fspath(path)
        self.dim = dim
        self.raw = raw
        self.rows = 0
        self._fh = open(self.path, "wb")
        self._fh.write(_header(dim, h, seed, mode).encode("utf-8"))
        if not raw:
            self._fh.write((("t,x" if dim == 1 else "t,x1,x2") + "\n").encode("utf-8"))

    def update(self, times, states):
        block = np.column_stack([times, states])
        if self.raw:
            self._fh.write(block.astype("<f8").tobytes())
        else:
            buf = io.StringIO()
            np.savetxt(buf, block, fmt="%.17g", delimiter=",")
            self._fh.write(buf.getvalue().encode("utf-8"))
        self.rows += len(block)

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def simulate_to_file(spec, cfg, mode, path, raw=False, observers=()):
    """Simulate and write the trajectory to `path`; returns the summary."""
    h = cfg.step(spec)
    with TrajectoryWriter(path, spec.dim, h, cfg.seed, mode, raw=raw) as writer:
        summary = euler_maruyama(spec, cfg, mode, [writer, *observers])
    return summary


def read_trajectory(path, chunk=CHUNK):
    """Open a trajectory file.

    Returns ``(header, chunks)`` where ``chunks`` is an iterator of
    ``(times, states)`` pairs shaped like the simulator's observer feed.
    """
    fh = open(path, "rb")
    header = _parse_header(fh.readline().decode("utf-8"))
    dim = header["dim"]
    width = dim + 1

    def split(block):
        block = block.reshape(-1, width)
        return block[:, 0].copy(), (block[:, 1].copy() if dim == 1 else block[:, 1:].copy())

    def raw_chunks():
        with fh:
            while True:
                data = fh.read(chunk * width * 8)
                if not data:
                    return
                if len(data) % (width * 8):
                    raise ValueError("truncated raw trajectory record")
                yield split(np.frombuffer(data, dtype="<f8"))

    def csv_chunks():
        with fh:
            text = io.TextIOWrapper(fh, encoding="utf-8")
            text.readline()  # column names
            while True:
                lines = list(islice(text, chunk))
                if not lines:
                    return
                block = np.loadtxt(io.StringIO("".join(lines)), delimiter=",", ndmin=2)
                yield split(block)

    pos = fh.tell()
    probe = fh.read(4)
    fh.seek(pos)
    is_csv = probe.startswith(b"t,x")
    return header, (csv_chunks() if is_csv else raw_chunks())


def load_trajectory(path):
    """Read a whole trajectory into memory: ``(header, times, states)``."""
    header, chunks = read_trajectory(path)
    ts, xs = [], []
    for t, x in chunks:
        ts.append(t)
        xs.append(x)
    shape = (0,) if header["dim"] == 1 else (0, 2)
    times = np.concatenate(ts) if ts else np.empty(0)
    states = np.concatenate(xs) if xs else np.empty(shape)
    return header, times, states
