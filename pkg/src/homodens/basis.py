"""Hermite polynomials and orthonormal Hermite functions.

Hermite functions are evaluated with the normalized three-term recurrence

    psi_{n+1}(x) = x sqrt(2/(n+1)) psi_n(x) - sqrt(n/(n+1)) psi_{n-1}(x),

which stays bounded by pi^{-1/4} for every order and never forms 2^n n!.
The raw physicists' polynomials are kept for cross-checks only; they
overflow doubles well before the orders the estimator uses.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "HERMITE_POLY_MAX_ORDER",
    "PSI0_PEAK",
    "hermite_poly",
    "hermite_fn",
    "hermite_fn_row",
    "tensor_fn",
]

HERMITE_POLY_MAX_ORDER = 512
#: pi^{-1/4}; the uniform bound on every Hermite function.
PSI0_PEAK = math.pi ** -0.25


def hermite_poly(n, x):
    """Physicists' Hermite polynomial H_n at `x` (scalar or array).

    Raises
    ------
    OverflowError
        If ``n`` exceeds :data:`HERMITE_POLY_MAX_ORDER` or the value itself
        leaves the double range (already near n = 170 for |x| of order 1).
    """
    n = int(n)
    if n < 0:
        raise ValueError(f"order must be non-negative, got {n}")
    if n > HERMITE_POLY_MAX_ORDER:
        raise OverflowError(
            f"H_{n} exceeds the double range; max order is {HERMITE_POLY_MAX_ORDER}"
        )
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = 2.0 * x
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, n):
            h_prev, h = h, 2.0 * x * h - 2.0 * k * h_prev
    if not np.all(np.isfinite(h)):
        raise OverflowError(f"H_{n} overflows the double range at the requested points")
    return h if h.ndim else float(h)


def hermite_fn_row(N, x):
    """Evaluate psi_0, ..., psi_{N-1} at `x` in one recurrence pass.

    Parameters
    ----------
    N : int
        number of orders, N >= 1
    x : float or array_like
        evaluation point(s)

    Returns
    -------
    numpy.ndarray
        shape ``np.shape(x) + (N,)``; the last axis runs over the order.
    """
    N = int(N)
    if N < 1:
        raise ValueError(f"need at least one order, got N={N}")
    x = np.asarray(x, dtype=float)
    out = np.empty((N,) + x.shape)
    out[0] = PSI0_PEAK * np.exp(-0.5 * x * x)
    if N > 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(1, N - 1):
        out[n + 1] = (
            x * math.sqrt(2.0 / (n + 1)) * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
        )
    return np.moveaxis(out, 0, -1)


def hermite_fn(n, x):
    """Orthonormal Hermite function psi_n at `x` (scalar or array)."""
    n = int(n)
    if n < 0:
        raise ValueError(f"order must be non-negative, got {n}")
    val = hermite_fn_row(n + 1, x)[..., n]
    return val if np.ndim(val) else float(val)


def tensor_fn(m, n, x1, x2):
    """Two-dimensional tensor basis function psi_m(x1) psi_n(x2)."""
    return hermite_fn(m, x1) * hermite_fn(n, x2)
