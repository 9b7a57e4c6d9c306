"""Closed forms for Gaussian densities, used as independent test oracles.

For ``rho = N(mu, sigma2)`` the Hermite coefficients, the Fourier integrals
of ``psi_n`` against a Gaussian and the characteristic function all have
explicit expressions.  The large factorials in them are never formed: the
physicists' polynomial is carried in the normalized form

    h_n(z) = H_n(z) / sqrt(2^n n!),
    h_{n+1} = sqrt(2/(n+1)) z h_n - sqrt(n/(n+1)) h_{n-1},

with a running logarithmic scale, and ``sqrt(2^n n!)`` cancels against the
normalization of ``psi_n``.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PrecisionWarning",
    "PreconditionError",
    "GaussianCase",
    "scaled_hermite",
    "htilde",
    "fourier_gauss_hermite",
    "hermite_bound",
    "gaussian_coeff",
    "gaussian_coeffs",
    "tail_min_order",
    "tail_bound",
    "gauss_char_integral",
]

_RESCALE = 1e100
_REL_WARN = 1e-6


class PrecisionWarning(RuntimeWarning):
    """Cancellation in a recurrence may have cost more than 1e-6 relative accuracy."""


class PreconditionError(ValueError):
    """An argument violates the hypothesis under which a bound holds."""

    def __init__(self, message, threshold=None):
        super().__init__(message)
        self.threshold = threshold


@dataclass(frozen=True)
class GaussianCase:
    """Gaussian density with mean `mu` and variance `sigma2`."""

    mu: float
    sigma2: float

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")

    @property
    def c(self):
        return (self.sigma2 + 1.0) / self.sigma2

    @property
    def lam(self):
        """Geometric decay rate of the coefficients."""
        if self.sigma2 == 1.0:
            return 0.25
        return 0.25 * math.log(abs((self.sigma2 + 1.0) / (self.sigma2 - 1.0)))

    @property
    def regime(self):
        """-1, 0 or +1 as sigma2 is below, equal to or above one."""
        return (self.sigma2 > 1.0) - (self.sigma2 < 1.0)


def _scaled_row(n_max, z):
    """``h_k(z)`` for k <= n_max as ``(mantissa, log_scale)`` arrays, plus a
    cancellation estimate ``max_k |h_k| / |h_{n_max}|``."""
    mant = np.empty(n_max + 1, dtype=complex)
    logs = np.empty(n_max + 1)
    prev, cur, scale = 0.0 + 0.0j, 1.0 + 0.0j, 0.0
    mant[0], logs[0] = cur, 0.0
    peak = 0.0
    for k in range(n_max):
        nxt = math.sqrt(2.0 / (k + 1)) * z * cur - math.sqrt(k / (k + 1)) * prev
        prev, cur = cur, nxt
        a = abs(cur)
        if a > _RESCALE:
            prev, cur, scale = prev / a, cur / a, scale + math.log(a)
        mant[k + 1], logs[k + 1] = cur, scale
        peak = max(peak, math.log(abs(cur)) + scale if cur != 0 else -math.inf)
    last = abs(mant[-1])
    log_last = math.log(last) + logs[-1] if last > 0 else -math.inf
    # an exact zero (odd order at the origin) carries no relative error
    growth = math.exp(min(peak - log_last, 700.0)) if n_max and last > 0 else 1.0
    return mant, logs, growth


def scaled_hermite(n, z):
    """``H_n(z) / sqrt(2^n n!)`` for complex `z`, as ``(mantissa, log_scale)``."""
    mant, logs, _ = _scaled_row(int(n), complex(z))
    return complex(mant[-1]), float(logs[-1])


def _branch(n, x, gc):
    """``htilde_n(x) / sqrt(2^n n!)`` in log form for sigma2 != 1, with the
    cancellation estimate of the recurrence."""
    c, s2, mu = gc.c, gc.sigma2, gc.mu
    if gc.regime < 0:
        a = 1.0 - 2.0 / c
        z = (1j * x - mu / s2) / (c * math.sqrt(a))
        lead = (-1.0) ** n
    else:
        a = 2.0 / c - 1.0
        z = (x + 1j * mu / s2) / (c * math.sqrt(a))
        lead = (-1j) ** (n % 4)
    mant, logs, growth = _scaled_row(n, z)
    return lead * mant[-1], logs[-1] + 0.5 * n * math.log(a), growth


def _check_cancellation(growth, n):
    rel = growth * (n + 1) * np.finfo(float).eps
    if rel > _REL_WARN:
        warnings.warn(f"order {n}: recurrence may have lost accuracy (~{rel:.1e} relative)",
                      PrecisionWarning, stacklevel=3)


def htilde(n, x, gc):
    """The three-case polynomial factor of the Gaussian-Hermite Fourier integral.

    Parameters
    ----------
    n : int
        order, n >= 0
    x : float
        real argument (a frequency)
    gc : GaussianCase

    Returns
    -------
    complex
        ``(-1)^n (1 - 2/c)^(n/2) H_n((i x - mu/s2) / (c sqrt(1 - 2/c)))`` for
        sigma2 < 1, ``(mu - i x)^n`` for sigma2 = 1 and
        ``(-i)^n (2/c - 1)^(n/2) H_n((x + i mu/s2) / (c sqrt(2/c - 1)))``
        for sigma2 > 1.
    """
    n = int(n)
    if n < 0:
        raise ValueError("order must be non-negative")
    if gc.regime == 0:
        return complex((gc.mu - 1j * x) ** n) if n else 1.0 + 0.0j
    val, logscale, growth = _branch(n, x, gc)
    _check_cancellation(growth, n)
    log_norm = 0.5 * (n * math.log(2.0) + math.lgamma(n + 1))
    return complex(val * math.exp(logscale + log_norm))


def _log_exponent(k_freq, gc, sign):
    # -mu^2/(2 s2) + (mu/s2 + sign i w)^2 / (2c); the sign follows the integrand
    mu, s2 = gc.mu, gc.sigma2
    return -mu * mu / (2.0 * s2) + (mu / s2 + sign * 1j * k_freq) ** 2 / (2.0 * gc.c)


def fourier_gauss_hermite(n, gc, k=0, L=2.0 * math.pi, eps=1.0, sign=+1):
    """``int psi_n(x) exp(-(x - mu)^2 / (2 s2) + sign i w x) dx`` in closed form.

    Here ``w = 2 pi k / (L eps)``.  The integral equals

        pi^(1/4) / sqrt(c 2^(n-1) n!) exp(-mu^2/(2 s2) + (mu/s2 + sign i w)^2 / (2c))
            * htilde_n(-sign w)

    Parameters
    ----------
    n : int
        Hermite order
    gc : GaussianCase
    k : int
        harmonic index, k >= 0
    L, eps : float
        fast period and scale separation
    sign : {+1, -1}
        sign of the oscillatory exponent

    Warns
    -----
    PrecisionWarning
        if the complex recurrence may have lost more than 1e-6 relative
        accuracy.
    """
    n, k = int(n), int(k)
    if n < 0 or k < 0:
        raise ValueError("n and k must be non-negative")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    w = 2.0 * math.pi * k / (L * eps)
    x = -sign * w
    expo = _log_exponent(w, gc, sign)
    if gc.regime == 0:
        base = gc.mu - 1j * x
        if n and base == 0:
            return 0.0 + 0.0j
        log_poly = (n * math.log(abs(base)) if n else 0.0) - 0.5 * (
            (n - 1) * math.log(2.0) + math.lgamma(n + 1))
        phase = cmath.exp(1j * n * cmath.phase(base)) if n else 1.0 + 0.0j
        log_mag = 0.25 * math.log(math.pi) - 0.5 * math.log(gc.c) + log_poly + expo.real
        return complex(phase * cmath.exp(1j * expo.imag) * math.exp(log_mag))
    # sqrt(2^n n!) of H_n cancels against the normalization; sqrt(2) remains
    val, logscale, growth = _branch(n, x, gc)
    _check_cancellation(growth, n)
    if val == 0:
        return 0.0 + 0.0j
    log_mag = (0.25 * math.log(math.pi) + 0.5 * math.log(2.0 / gc.c) + logscale
               + math.log(abs(val)) + expo.real)
    phase = cmath.exp(1j * (cmath.phase(val) + expo.imag))
    return complex(phase * math.exp(log_mag))


def gaussian_coeff(n, gc):
    """Hermite coefficient ``int psi_n rho dx`` of the Gaussian density.

    The closed form is written with complex arithmetic when sigma2 > 1, but
    the result is real; an imaginary residue above 1e-12 raises.
    """
    val = fourier_gauss_hermite(n, gc, k=0) / math.sqrt(2.0 * math.pi * gc.sigma2)
    if abs(val.imag) > 1e-12 * max(1.0, abs(val.real)):
        raise ArithmeticError(f"coefficient {n} has imaginary part {val.imag:.3g}")
    return float(val.real)


def gaussian_coeffs(N, gc):
    """``gaussian_coeff(n, gc)`` for n < N in one recurrence pass."""
    N = int(N)
    if N < 1:
        raise ValueError("N must be at least 1")
    pref = -0.25 * math.log(math.pi) - 0.5 * math.log(gc.sigma2 + 1.0) - gc.mu ** 2 / (2.0 * (gc.sigma2 + 1.0))
    out = np.empty(N)
    if gc.regime == 0:
        n = np.arange(N)
        # mu^n / sqrt(2^n n!) via the running product
        ratio = np.ones(N)
        for j in range(1, N):
            ratio[j] = ratio[j - 1] * gc.mu / math.sqrt(2.0 * j)
        return math.exp(pref) * ratio
    c, s2, mu = gc.c, gc.sigma2, gc.mu
    if gc.regime < 0:
        a = 1.0 - 2.0 / c
        z = complex(-mu / s2 / (c * math.sqrt(a)))
        lead = (-1.0) ** np.arange(N)
    else:
        a = 2.0 / c - 1.0
        z = 1j * mu / s2 / (c * math.sqrt(a))
        lead = np.array([1.0, -1j, -1.0, 1j])[np.arange(N) % 4]
    mant, logs, _ = _scaled_row(N - 1, z)
    n = np.arange(N)
    val = lead * mant * np.exp(logs + 0.5 * n * math.log(a) + pref)
    if np.any(np.abs(val.imag) > 1e-12 * np.maximum(1.0, np.abs(val.real))):
        raise ArithmeticError("closed-form coefficients have an imaginary residue")
    out[:] = val.real
    return out


def hermite_bound(n, x, two_branch=False, log=False):
    """Upper bound on ``|H_n(x)|``.

    The default form is ``4^n (1 + n/2) (2^(n/2) n^(n/2) + |x|^n)``.  With
    ``two_branch=True`` it is ``n^(n/2) (4 sqrt 2)^n (1 + n/2)`` for
    ``|x| <= sqrt(2n)`` and ``4^n |x|^n (1 + n/2)`` beyond.  ``0^0`` is 1.

    Parameters
    ----------
    n : int
    x : float
    two_branch : bool
    log : bool
        return the natural log of the bound instead (no overflow)
    """
    n = int(n)
    if n < 0:
        raise ValueError("order must be non-negative")
    ax = abs(float(x))

    def lpow(base, e):
        # log(base^e) with 0^0 = 1
        if e == 0:
            return 0.0
        return -math.inf if base == 0 else e * math.log(base)

    lead = n * math.log(4.0) + math.log1p(n / 2.0)
    if two_branch:
        if ax <= math.sqrt(2.0 * n):
            out = lead + lpow(n, n / 2.0) + 0.5 * n * math.log(2.0)
        else:
            out = lead + lpow(ax, n)
    else:
        out = lead + np.logaddexp(0.5 * n * math.log(2.0) + lpow(n, n / 2.0), lpow(ax, n))
    out = float(out)
    return out if log else math.exp(out)


def tail_min_order(gc):
    """Smallest admissible truncation order for :func:`tail_bound` (real)."""
    mu2 = gc.mu * gc.mu
    if gc.regime == 0:
        return math.exp(1.5) * mu2 / 2.0
    s2 = gc.sigma2
    return 32.0 * mu2 / abs(s2 * s2 - 1.0) / math.log(abs((s2 + 1.0) / (s2 - 1.0))) ** 2


def tail_bound(N, gc):
    """Bound on ``(sum_{n >= N} alpha_n^2)^(1/2)`` for the Gaussian density.

    Raises
    ------
    PreconditionError
        if N is below :func:`tail_min_order`; the threshold is attached.
    """
    nmin = tail_min_order(gc)
    if N < nmin:
        raise PreconditionError(f"tail bound needs N >= {nmin:.6g}, got N = {N}", threshold=nmin)
    lam = gc.lam
    s1 = gc.sigma2 + 1.0
    return math.exp(-gc.mu ** 2 / (2.0 * s1) - lam * N) / (
        math.pi ** 0.25 * math.sqrt(s1 * -math.expm1(-2.0 * lam)))


def gauss_char_integral(k, mu, sigma2, L, eps, sign=+1):
    """``int exp(-(x - mu)^2 / (2 sigma2) + sign i w x) dx`` with ``w = 2 pi k / (L eps)``."""
    if int(k) < 1:
        raise ValueError("k must be at least 1")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    w = 2.0 * math.pi * k / (L * eps)
    return complex(math.sqrt(2.0 * math.pi * sigma2) * cmath.exp(sign * 1j * w * mu - 0.5 * sigma2 * w * w))
