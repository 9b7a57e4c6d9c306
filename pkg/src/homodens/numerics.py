"""Quadrature rules, evaluation grids and L2 error metrics."""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import hermite as _herm
from scipy import integrate

__all__ = [
    "NumericalError",
    "QuadResult",
    "Grid1D",
    "Grid2D",
    "quad_adaptive",
    "gauss_hermite_nodes",
    "l2_error",
]


class NumericalError(RuntimeError):
    """A numerical routine failed to reach its requested accuracy.

    The best available value and the achieved tolerance are attached so the
    caller can decide whether to proceed.
    """

    def __init__(self, message, value=None, achieved_tol=None):
        super().__init__(message)
        self.value = value
        self.achieved_tol = achieved_tol


@dataclass(frozen=True)
class QuadResult:
    value: float
    achieved_tol: float


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid of `count` points on ``[lo, hi]``."""

    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"grid needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.count < 2:
            raise ValueError(f"grid needs at least 2 points, got {self.count}")

    def points(self):
        return np.linspace(self.lo, self.hi, self.count)

    @property
    def spacing(self):
        return (self.hi - self.lo) / (self.count - 1)


@dataclass(frozen=True)
class Grid2D:
    """Tensor box ``x1 x x2`` of two uniform grids."""

    x1: Grid1D
    x2: Grid1D

    def mesh(self):
        """Return ``(X1, X2)`` with ``indexing="ij"``."""
        return np.meshgrid(self.x1.points(), self.x2.points(), indexing="ij")


def _compactified(f):
    # x = t / (1 - t^2) maps (-1, 1) onto the real line
    def g(t):
        s = 1.0 - t * t
        if s <= 0.0:
            return 0.0
        x = t / s
        val = f(x)
        if val == 0.0:
            return 0.0
        return val * (1.0 + t * t) / (s * s)

    return g


def quad_adaptive(f, tol=1e-10, interval=None, limit=2000, points=None):
    """Adaptive Gauss-Kronrod quadrature of a scalar function.

    With ``interval=None`` the integral runs over the whole real line,
    mapped onto ``(-1, 1)`` by ``x = t / (1 - t^2)``.  A finite
    ``interval=(a, b)`` is integrated directly.

    Parameters
    ----------
    f : callable
        scalar integrand ``float -> float``
    tol : float
        requested absolute (and relative) tolerance
    interval : tuple of float, optional
        finite integration limits
    limit : int
        maximum number of subintervals
    points : sequence of float, optional
        breakpoints for a finite interval

    Returns
    -------
    QuadResult

    Raises
    ------
    NumericalError
        if the subdivision budget runs out before reaching `tol`.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if interval is None:
        g, a, b = _compactified(f), -1.0, 1.0
        if points is not None:
            points = [p / (0.5 + math.sqrt(0.25 + p * p)) for p in points]
    else:
        g, (a, b) = f, interval
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(
            g, a, b, epsabs=tol, epsrel=tol, limit=limit, points=points, full_output=1
        )
    value, err = out[0], out[1]
    if len(out) > 3 and err > max(tol, tol * abs(value)):
        raise NumericalError(
            f"quadrature did not converge: {out[3].splitlines()[0] if out[3] else ''}"
            f" (value={value!r}, error estimate={err:.3g})",
            value=value,
            achieved_tol=err,
        )
    return QuadResult(float(value), float(err))


@functools.lru_cache(maxsize=64)
def _gauss_hermite_cached(n):
    x, w = _herm.hermgauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_hermite_nodes(n):
    """Gauss-Hermite nodes and weights for the weight ``exp(-x^2)``.

    Exact for polynomials up to degree ``2n - 1``.  Results are cached and
    returned as read-only arrays.
    """
    n = int(n)
    if not 1 <= n <= 400:
        raise ValueError(f"Gauss-Hermite order must lie in [1, 400], got {n}")
    return _gauss_hermite_cached(n)


def _values_on(f, pts):
    if callable(f):
        return np.asarray(f(pts), dtype=float)
    return np.asarray(f, dtype=float)


def l2_error(f, g, grid):
    """Trapezoid approximation of the L2 distance between `f` and `g`.

    `f` and `g` are callables (vectorized over the grid points, or taking
    ``(x1, x2)`` meshes for a :class:`Grid2D`) or arrays of values already
    sampled on `grid`.
    """
    if isinstance(grid, Grid2D):
        X1, X2 = grid.mesh()
        fv = f(X1, X2) if callable(f) else np.asarray(f, dtype=float)
        gv = g(X1, X2) if callable(g) else np.asarray(g, dtype=float)
        d2 = (fv - gv) ** 2
        inner = integrate.trapezoid(d2, dx=grid.x2.spacing, axis=1)
        return float(math.sqrt(integrate.trapezoid(inner, dx=grid.x1.spacing)))
    pts = grid.points()
    d2 = (_values_on(f, pts) - _values_on(g, pts)) ** 2
    return float(math.sqrt(integrate.trapezoid(d2, dx=grid.spacing)))
