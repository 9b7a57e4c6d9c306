"""Hermite spectral estimator of the homogenized invariant density.

The coefficients are ergodic time averages of the Hermite functions along a
multiscale trajectory,

    alpha_hat_n = (1/T) int_0^T psi_n(X_t) dt,

approximated by the left Riemann sum over the Euler-Maruyama grid, and the
density estimate is the truncated series sum_{n<N} alpha_hat_n psi_n(x).
The series is reported raw: it can dip below zero and is never clipped.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

from .basis import hermite_fn_row
from .numerics import NumericalError

__all__ = [
    "EmptyStreamError",
    "SpectralEstimate",
    "CoeffObserver",
    "TensorCoeffObserver",
    "coeff_observer",
    "eval_density",
    "eval_density_grid",
    "display_density",
    "ModeSelection",
    "gamma_min",
    "select_modes",
    "select_time",
    "theorem_selection",
    "quadrature_coeffs",
    "save_coeffs",
    "load_coeffs",
]


class EmptyStreamError(ValueError):
    """Finalize called before any state was observed."""


@dataclass
class SpectralEstimate:
    """Coefficients (vector in 1D, N x N matrix in 2D) plus run metadata."""

    dim: int
    coeffs: np.ndarray
    N: int
    T: float | None = None
    eps: float | None = None
    h: float | None = None
    seed: int | None = None
    potential: str | None = None
    samples: int | None = None

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        shape = (self.N,) if self.dim == 1 else (self.N, self.N)
        if self.coeffs.shape != shape:
            raise ValueError(f"coeffs shape {self.coeffs.shape} does not match dim={self.dim}, N={self.N}")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("coefficients must be finite")

    def __call__(self, x):
        return eval_density(self, x)

    def to_json(self):
        return {
            "dim": self.dim,
            "N": self.N,
            "T": self.T,
            "eps": self.eps,
            "h": self.h,
            "seed": self.seed,
            "potential": self.potential,
            "samples": self.samples,
            "coeffs": [float(v) for v in self.coeffs.ravel()],
        }

    @classmethod
    def from_json(cls, data):
        dim, N = int(data["dim"]), int(data["N"])
        coeffs = np.asarray(data["coeffs"], dtype=float)
        if dim == 2:
            coeffs = coeffs.reshape(N, N)
        return cls(
            dim=dim, coeffs=coeffs, N=N, T=data.get("T"), eps=data.get("eps"),
            h=data.get("h"), seed=data.get("seed"), potential=data.get("potential"),
            samples=data.get("samples"),
        )


def save_coeffs(est, path):
    """Write the coefficient file (JSON; row-major matrix in 2D)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(est.to_json(), fh, indent=1)
        fh.write("\n")


def load_coeffs(path):
    with open(path, encoding="utf-8") as fh:
        return SpectralEstimate.from_json(json.load(fh))


class CoeffObserver:
    """Streaming accumulator of ``sum_k psi_n(X_k)`` for n < N."""

    dim = 1

    def __init__(self, N):
        if int(N) < 1:
            raise ValueError(f"N must be at least 1, got {N}")
        self.N = int(N)
        self.sums = np.zeros(self.N)
        self.count = 0
        self.t_first = None
        self.h = None

    def _track(self, times):
        if self.t_first is None and len(times):
            self.t_first = float(times[0])
        if self.h is None and len(times) > 1:
            self.h = float(times[1] - times[0])

    def update(self, times, states):
        states = np.asarray(states, dtype=float)
        self._track(np.asarray(times))
        self.sums += hermite_fn_row(self.N, states).sum(axis=0)
        self.count += len(states)

    def merge(self, other):
        """Fold another observer's partial sums into this one."""
        if other.N != self.N or other.dim != self.dim:
            raise ValueError("cannot merge observers of different shape")
        self.sums = self.sums + other.sums
        self.count += other.count
        if self.h is None:
            self.h = other.h
        return self

    def finalize(self, **meta):
        """Return the :class:`SpectralEstimate` for the stream seen so far.

        Keyword arguments fill the metadata; ``T`` defaults to the covered
        Riemann horizon ``count * h``.
        """
        if self.count == 0:
            raise EmptyStreamError("no states observed")
        meta.setdefault("h", self.h)
        if meta.get("T") is None and meta["h"] is not None:
            meta["T"] = self.count * meta["h"]
        return SpectralEstimate(dim=self.dim, coeffs=self.sums / self.count, N=self.N,
                                samples=self.count, **meta)


class TensorCoeffObserver(CoeffObserver):
    """Two-dimensional accumulator of ``sum_k psi_m(X1_k) psi_n(X2_k)``."""

    dim = 2

    def __init__(self, N):
        super().__init__(N)
        self.sums = np.zeros((self.N, self.N))

    def update(self, times, states):
        states = np.asarray(states, dtype=float).reshape(-1, 2)
        self._track(np.asarray(times))
        r1 = hermite_fn_row(self.N, states[:, 0])
        r2 = hermite_fn_row(self.N, states[:, 1])
        self.sums += r1.T @ r2
        self.count += len(states)


def coeff_observer(N, dim=1):
    """Fresh streaming coefficient observer for a `dim`-dimensional stream."""
    return CoeffObserver(N) if dim == 1 else TensorCoeffObserver(N)


def eval_density(est, x):
    """Evaluate the truncated series at `x`.

    In 1D `x` is a scalar or array; in 2D its last axis has length 2.
    """
    if est.dim == 1:
        val = hermite_fn_row(est.N, x) @ est.coeffs
        return val if np.ndim(val) else float(val)
    x = np.asarray(x, dtype=float)
    r1 = hermite_fn_row(est.N, x[..., 0])
    r2 = hermite_fn_row(est.N, x[..., 1])
    val = np.einsum("...m,mn,...n->...", r1, est.coeffs, r2)
    return val if np.ndim(val) else float(val)


def eval_density_grid(est, x1, x2):
    """2D estimate on the tensor grid ``x1 x x2`` (``indexing="ij"``)."""
    r1 = hermite_fn_row(est.N, np.asarray(x1, dtype=float))
    r2 = hermite_fn_row(est.N, np.asarray(x2, dtype=float))
    return r1 @ est.coeffs @ r2.T


def display_density(values, dx):
    """Clip negative values and renormalize on a uniform grid (display only)."""
    v = np.clip(np.asarray(values, dtype=float), 0.0, None)
    mass = np.trapezoid(v, dx=dx) if hasattr(np, "trapezoid") else np.trapz(v, dx=dx)
    return v / mass if mass > 0 else v


# ---------------------------------------------------------------------------
# selection rules for N and T


@dataclass(frozen=True)
class ModeSelection:
    """Scaling of N and T with eps prescribed by the convergence theorem.

    ``formal`` marks constants derived outside the theorem's hypotheses
    (e.g. a non-Lipschitz slow drift); ``violated`` marks a clamp to N = 1.
    """

    c: float
    l: float
    r: float
    gamma: float | None = None
    N: int | None = None
    zeta: float | None = None
    kappa: float | None = None
    T: float | None = None
    formal: bool = False
    violated: bool = False


def gamma_min(sigma2):
    """Lower limit for gamma in the mode-count rule."""
    if sigma2 == 1.0:
        return 3.0 + math.log(8.0)
    c = (sigma2 + 1.0) / sigma2
    return c * c + max(16.0 * math.exp(1.5), (c / 4.0) * (math.log(abs(2.0 / c - 1.0)) + 2.0 * math.log(4.0)))


def select_modes(eps, L, sigma2, l=math.nan, r=math.nan, gamma_margin=1.0, gamma=None):
    """Number of modes ``N = floor(pi^2 / (gamma L^2 eps^2))``.

    ``gamma`` defaults to ``gamma_min(sigma2) * gamma_margin``.  N is clamped
    to at least 1, in which case ``violated`` is set.
    """
    if not (eps > 0 and L > 0 and sigma2 > 0):
        raise ValueError("eps, L and sigma2 must be positive")
    if gamma is None:
        if gamma_margin < 1.0:
            raise ValueError("gamma_margin must be >= 1")
        gamma = gamma_min(sigma2) * gamma_margin
    ratio = math.pi ** 2 / (gamma * L * L * eps * eps)
    N = int(math.floor(ratio))
    c = (sigma2 + 1.0) / sigma2
    return ModeSelection(
        c=c, l=l, r=r, gamma=gamma, N=max(N, 1), violated=N < 1,
        formal=not (math.isfinite(l) and math.isfinite(r)),
    )


def select_time(eps, l, r, kappa=1.0, zeta_margin=1.1, fallback_T=None):
    """Observation time ``T = kappa eps^(-zeta)``.

    ``zeta = zeta_min * zeta_margin`` with ``zeta_min = 5`` when ``r >= l``
    and ``5 l / r`` otherwise.  When ``l`` or ``r`` is not finite (or r <= 0)
    the rule is formal: ``T`` falls back to `fallback_T`.
    """
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if not zeta_margin > 1:
        raise ValueError("zeta_margin must exceed 1")
    formal = not (math.isfinite(l) and math.isfinite(r) and r > 0)
    if formal:
        return ModeSelection(c=math.nan, l=l, r=r, kappa=kappa, T=fallback_T, formal=True)
    zeta = (5.0 if r >= l else 5.0 * l / r) * zeta_margin
    return ModeSelection(c=math.nan, l=l, r=r, zeta=zeta, kappa=kappa, T=kappa * eps ** (-zeta))


def theorem_selection(spec, gamma_margin=1.0, kappa=1.0, zeta_margin=1.1,
                      fallback_N=None, fallback_T=None):
    """Both selection rules for a 1D problem, with the potential's constants."""
    L_V, beta, _, formal = spec.theorem_constants()
    V = spec.slow[0]
    l = (L_V + abs(float(V.derivative(0.0)))) / spec.sigma2
    r = beta / spec.sigma2
    modes = select_modes(spec.eps, spec.L, spec.sigma2, l, r, gamma_margin)
    times = select_time(spec.eps, l, r, kappa, zeta_margin, fallback_T)
    N = fallback_N if (formal and fallback_N is not None) else modes.N
    return replace(modes, N=N, zeta=times.zeta, kappa=kappa, T=times.T,
                   formal=formal or modes.formal or times.formal)


# ---------------------------------------------------------------------------
# deterministic targets


def quadrature_coeffs(density, N, tol=1e-10):
    """Hermite coefficients ``int psi_n rho dx`` of a reference density.

    One-dimensional densities are integrated adaptively over their
    evaluation window (the tails beyond it are below 1e-12).  Separable 2D
    densities return the outer product of their factors' coefficients.
    """
    if getattr(density, "dim", 1) == 2:
        a1 = quadrature_coeffs(density.factors[0], N, tol)
        a2 = quadrature_coeffs(density.factors[1], N, tol)
        return np.outer(a1, a2)
    lo, hi = density.domain
    # breakpoints help the adaptive rule with oscillatory rho_eps
    points = np.linspace(lo, hi, 33)[1:-1]

    def f(x):
        return hermite_fn_row(N, x) * density(x)

    value, err = integrate.quad_vec(f, lo, hi, epsabs=tol, epsrel=tol, limit=4000,
                                    points=points, norm="max")
    if err > max(tol, tol * np.max(np.abs(value))):
        raise NumericalError(f"coefficient quadrature reached only {err:.3g}", value, err)
    return np.asarray(value, dtype=float)
