"""Potentials, homogenization constants and exact invariant densities.

The slow potential V is a polynomial and the fast potential p a finite
trigonometric series, one of each per coordinate.  Keeping both families
parametric lets the simulator compile a single drift kernel for every
instance, and it makes the two-dimensional case separable:
V(x) = V1(x1) + V2(x2), p(y) = p1(y1) + p2(y2).

Both invariant densities use the Gibbs weight exp(-(.)/sigma^2), which is
the stationary density of the multiscale SDE with noise sqrt(2 sigma^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import NumericalError, quad_adaptive

__all__ = [
    "TWO_PI",
    "CatalogError",
    "DivergenceError",
    "PolynomialPotential",
    "TrigPotential",
    "ProblemSpec",
    "HomogenizedModel",
    "ReferenceDensity",
    "ProductDensity",
    "PotentialTemplate",
    "homogenize",
    "reference_density",
    "builtin_potentials",
    "slow_potential",
    "fast_potential",
    "problem_from_names",
]

TWO_PI = 2.0 * math.pi


class CatalogError(KeyError):
    """Unknown potential name."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class DivergenceError(ArithmeticError):
    """An integral or trajectory blew up."""


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class PolynomialPotential:
    """Slow potential ``V(x) = sum_k coeffs[k] x^k`` with ``V(0) = 0``.

    The constant coefficient is dropped at construction.
    """

    coeffs: tuple
    name: str = "polynomial"

    def __post_init__(self):
        c = [float(v) for v in self.coeffs] or [0.0]
        c[0] = 0.0
        while len(c) > 1 and c[-1] == 0.0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def derivative(self, x):
        return np.polynomial.polynomial.polyval(x, self.derivative_coeffs)

    @property
    def derivative_coeffs(self):
        d = np.polynomial.polynomial.polyder(np.asarray(self.coeffs))
        return tuple(float(v) for v in d) if len(d) else (0.0,)

    def assumption_constants(self):
        """Return ``(L_V, beta, R)`` for the confinement assumptions.

        ``L_V`` is the global Lipschitz constant of V'; it is ``inf`` for
        polynomials of degree above two (e.g. the double well), in which
        case every theorem-derived quantity is only formal.  ``beta`` and
        ``R`` give ``-sign(x) V'(x) <= -beta |x|`` for ``|x| >= R``.
        """
        c = self.coeffs + (0.0,) * (3 - len(self.coeffs))
        a1, a2 = c[1], c[2]
        if self.degree <= 2:
            lip = abs(2.0 * a2)
            if a2 <= 0:
                return lip, 0.0, math.inf
            R = max(1.0, abs(a1) / a2)
            return lip, 2.0 * a2 - abs(a1) / R, R
        lead = self.coeffs[-1]
        if self.degree % 2 == 1 or lead <= 0:
            return math.inf, 0.0, math.inf
        # superlinear growth: V'(x) x >= |x|^2 eventually; find R numerically
        xs = np.linspace(1.0, 1e3, 200001)
        ok = (self.derivative(xs) >= xs) & (-self.derivative(-xs) >= xs)
        bad = np.nonzero(~ok)[0]
        R = float(xs[bad[-1] + 1]) if len(bad) else 1.0
        return math.inf, 1.0, R


@dataclass(frozen=True)
class TrigPotential:
    """Fast potential ``p(y) = sum_k a_k cos(k w y) + b_k sin(k w y) + c``.

    ``w = 2 pi / period`` and ``c`` is fixed so that ``p(0) = 0``.
    """

    cos_coeffs: tuple = ()
    sin_coeffs: tuple = ()
    period: float = TWO_PI
    name: str = "trig"

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")
        n = max(len(self.cos_coeffs), len(self.sin_coeffs))
        a = tuple(float(v) for v in self.cos_coeffs) + (0.0,) * (n - len(self.cos_coeffs))
        b = tuple(float(v) for v in self.sin_coeffs) + (0.0,) * (n - len(self.sin_coeffs))
        object.__setattr__(self, "cos_coeffs", a)
        object.__setattr__(self, "sin_coeffs", b)

    @property
    def omega(self):
        return TWO_PI / self.period

    @property
    def is_constant(self):
        return not any(self.cos_coeffs) and not any(self.sin_coeffs)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y) - sum(self.cos_coeffs)
        for k, (a, b) in enumerate(zip(self.cos_coeffs, self.sin_coeffs), start=1):
            arg = k * self.omega * y
            out = out + a * np.cos(arg) + b * np.sin(arg)
        return out if out.ndim else float(out)

    def derivative(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        for k, (a, b) in enumerate(zip(self.cos_coeffs, self.sin_coeffs), start=1):
            kw = k * self.omega
            out = out + kw * (b * np.cos(kw * y) - a * np.sin(kw * y))
        return out if out.ndim else float(out)

    def bounds(self):
        """Crude ``(min, max)`` of p from a dense sample over one period."""
        ys = np.linspace(0.0, self.period, 4097)
        v = self(ys)
        return float(v.min()), float(v.max())


# ---------------------------------------------------------------------------
# problem definition


def _as_tuple(obj):
    return tuple(obj) if isinstance(obj, (tuple, list)) else (obj,)


@dataclass(frozen=True)
class ProblemSpec:
    """One multiscale SDE instance

        dX = -grad V(X) dt - (1/eps) grad p(X/eps) dt + sqrt(2 sigma2) dW.

    ``slow`` and ``fast`` hold one potential per coordinate (a bare
    potential means a one-dimensional problem).  ``sigma2 = 0`` is only
    accepted with ``testing=True``.
    """

    slow: tuple
    fast: tuple
    sigma2: float
    eps: float
    x0: tuple = (0.0,)
    name: str = ""
    testing: bool = False

    def __post_init__(self):
        slow, fast = _as_tuple(self.slow), _as_tuple(self.fast)
        x0 = tuple(float(v) for v in np.atleast_1d(np.asarray(self.x0, dtype=float)))
        if len(x0) == 1 and len(slow) == 2:
            x0 = x0 * 2
        if len(slow) not in (1, 2) or len(fast) != len(slow) or len(x0) != len(slow):
            raise ValueError("slow, fast and x0 must all have dimension 1 or 2")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.sigma2 < 0 or (self.sigma2 == 0 and not self.testing):
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        for p in fast:
            ys = np.linspace(-3.0, 3.0, 13) * p.period
            if np.max(np.abs(p(ys + p.period) - p(ys))) > 1e-10:
                raise ValueError(f"fast potential {p.name!r} is not {p.period}-periodic")
        object.__setattr__(self, "slow", slow)
        object.__setattr__(self, "fast", fast)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "eps", float(self.eps))

    @property
    def dim(self):
        return len(self.slow)

    @property
    def L(self):
        """Fast period (a tuple of per-coordinate periods in 2D)."""
        periods = tuple(p.period for p in self.fast)
        return periods[0] if self.dim == 1 else periods

    def V(self, x):
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            return self.slow[0](x)
        return self.slow[0](x[..., 0]) + self.slow[1](x[..., 1])

    def p(self, y):
        y = np.asarray(y, dtype=float)
        if self.dim == 1:
            return self.fast[0](y)
        return self.fast[0](y[..., 0]) + self.fast[1](y[..., 1])

    def drift(self, x):
        """Full multiscale drift ``-V'(x) - p'(x/eps)/eps`` (per coordinate)."""
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            V, p = self.slow[0], self.fast[0]
            return -V.derivative(x) - p.derivative(x / self.eps) / self.eps
        return np.stack(
            [-V.derivative(x[..., i]) - p.derivative(x[..., i] / self.eps) / self.eps
             for i, (V, p) in enumerate(zip(self.slow, self.fast))],
            axis=-1,
        )

    def theorem_constants(self):
        """``(L_V, beta, R, formal)`` for the 1D slow potential."""
        lip, beta, R = self.slow[0].assumption_constants()
        return lip, beta, R, not (math.isfinite(lip) and math.isfinite(R) and beta > 0)


@dataclass(frozen=True)
class HomogenizedModel:
    """Homogenization constants for one periodic fast potential."""

    Pi: float
    PiHat: float
    K: float
    Sigma: float

    def effective_drift(self, slow, x):
        """Homogenized drift ``-K V'(x)``."""
        return -self.K * slow.derivative(x)


def homogenize(p, L, sigma2, tol=1e-10):
    """Compute ``Pi``, ``PiHat``, ``K = L^2/(Pi PiHat)`` and ``Sigma = K sigma2``.

    Parameters
    ----------
    p : callable
        L-periodic fast potential
    L : float
        period
    sigma2 : float
        diffusion coefficient sigma^2 > 0
    """
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    if not L > 0:
        raise ValueError(f"period must be positive, got {L}")
    Pi = quad_adaptive(lambda y: math.exp(-p(y) / sigma2), tol, interval=(0.0, L)).value
    PiHat = quad_adaptive(lambda y: math.exp(p(y) / sigma2), tol, interval=(0.0, L)).value
    K = L * L / (Pi * PiHat)
    # Cauchy-Schwarz gives K <= 1; clip rounding above it
    K = min(K, 1.0)
    return HomogenizedModel(Pi=Pi, PiHat=PiHat, K=K, Sigma=K * sigma2)


# ---------------------------------------------------------------------------
# reference densities


@dataclass(frozen=True)
class ReferenceDensity:
    """Normalized one-dimensional invariant density.

    ``kind`` is ``"rho"`` (homogenized) or ``"rho_eps"`` (multiscale).
    ``domain`` is an evaluation window outside which the density is below
    1e-12.
    """

    kind: str
    normalization: float
    domain: tuple
    log_weight: object = field(repr=False)

    dim = 1

    def __call__(self, x):
        return np.exp(self.log_weight(np.asarray(x, dtype=float))) / self.normalization


@dataclass(frozen=True)
class ProductDensity:
    """Two-dimensional density ``rho1(x1) rho2(x2)`` of a separable problem."""

    kind: str
    factors: tuple

    dim = 2

    @property
    def normalization(self):
        return self.factors[0].normalization * self.factors[1].normalization

    @property
    def domain(self):
        return tuple(f.domain for f in self.factors)

    def __call__(self, x1, x2):
        return self.factors[0](x1) * self.factors[1](x2)


def _tail_window(log_weight, Z, floor=1e-12, step=0.25, cap=200.0):
    def edge(sign):
        x = step
        while x < cap:
            if math.exp(log_weight(sign * x)) / Z < floor:
                # fast oscillations can dip below the floor; require a margin
                if all(math.exp(log_weight(sign * (x + d))) / Z < floor
                       for d in np.linspace(0.0, 1.0, 41)):
                    return sign * x
            x += step
        raise DivergenceError("density does not decay within |x| < 200")

    return float(edge(-1.0)), float(edge(1.0))


def _density_1d(V, p, sigma2, eps, kind, tol):
    if kind == "rho":
        def log_weight(x):
            return -V(x) / sigma2
    elif kind == "rho_eps":
        def log_weight(x):
            return -(V(x) + p(np.asarray(x) / eps)) / sigma2
    else:
        raise ValueError(f"kind must be 'rho' or 'rho_eps', got {kind!r}")

    # shift by the minimum of V to keep exp() in range
    xs = np.linspace(-20.0, 20.0, 8001)
    shift = float(np.max(log_weight(xs)))
    if not np.isfinite(shift):
        raise DivergenceError("potential is not finite on [-20, 20]")
    far = log_weight(np.array([-1e3, 1e3]))
    if np.any(far - shift > -50.0):
        raise DivergenceError("exp(-V/sigma2) is not integrable (V does not confine)")

    def f(x):
        return math.exp(float(log_weight(x)) - shift)

    limit = 4000 if kind == "rho_eps" else 2000
    try:
        res = quad_adaptive(f, tol, limit=limit)
    except NumericalError as exc:
        raise NumericalError(f"normalization of {kind}: {exc}", exc.value, exc.achieved_tol)
    if not (np.isfinite(res.value) and res.value > 0):
        raise DivergenceError(f"normalization of {kind} diverged")
    Z = res.value * math.exp(shift)
    domain = _tail_window(lambda x: float(log_weight(x)), Z)
    return ReferenceDensity(kind=kind, normalization=Z, domain=domain, log_weight=log_weight)


def reference_density(spec, kind="rho", tol=1e-10):
    """Exact invariant density of the homogenized (``"rho"``) or multiscale
    (``"rho_eps"``) dynamics, with its normalization computed once here.
    """
    factors = tuple(
        _density_1d(V, p, spec.sigma2, spec.eps, kind, tol)
        for V, p in zip(spec.slow, spec.fast)
    )
    if spec.dim == 1:
        return factors[0]
    return ProductDensity(kind=kind, factors=factors)


# ---------------------------------------------------------------------------
# catalog


def _quadratic(mu=0.0):
    return PolynomialPotential((0.0, -float(mu), 0.5), name="quadratic")


def _double_well():
    return PolynomialPotential((0.0, 0.0, -0.5, 0.0, 0.25), name="double-well")


_SLOW = {
    "quadratic": (1, lambda mu=0.0: (_quadratic(mu),)),
    "double-well": (1, lambda: (_double_well(),)),
    "2d-example": (2, lambda: (_double_well(), _double_well())),
}


def _cos(L=TWO_PI):
    return TrigPotential(cos_coeffs=(1.0,), period=L, name="cos")


def _none(L=TWO_PI):
    return TrigPotential(period=L, name="none")


_FAST = {
    "cos": (1, lambda L=TWO_PI: (_cos(L),)),
    "none": (0, lambda L=TWO_PI: (_none(L),)),
    # sin(y1) + sin(y2)^2, with sin^2 y = (1 - cos 2y)/2
    "sin+sin2": (2, lambda L=TWO_PI: (
        TrigPotential(sin_coeffs=(1.0,), period=L, name="sin"),
        TrigPotential(cos_coeffs=(0.0, -0.5), period=L, name="sin2"),
    )),
    # y2-symmetric part removed: p(y) = sin(y1)
    "sin": (2, lambda L=TWO_PI: (
        TrigPotential(sin_coeffs=(1.0,), period=L, name="sin"),
        TrigPotential(period=L, name="none"),
    )),
}

_DEFAULT_FAST = {"quadratic": "cos", "double-well": "cos", "2d-example": "sin+sin2"}


def _lookup(table, name, what):
    try:
        return table[name]
    except KeyError:
        raise CatalogError(
            f"unknown {what} {name!r}; valid names: {', '.join(sorted(table))}"
        ) from None


def slow_potential(name, **params):
    """Slow potentials by catalog name, as a per-coordinate tuple."""
    _, factory = _lookup(_SLOW, name, "potential")
    return factory(**params)


def fast_potential(name, dim=1, L=TWO_PI):
    """Fast periodic potentials by catalog name, as a per-coordinate tuple."""
    fdim, factory = _lookup(_FAST, name, "fast potential")
    parts = factory(L)
    if fdim == 0:
        parts = parts * dim
    elif fdim != dim:
        raise CatalogError(f"fast potential {name!r} is {fdim}-dimensional, problem is {dim}D")
    return parts


def problem_from_names(potential, fast=None, eps=0.1, sigma2=1.0, L=TWO_PI, x0=0.0,
                       testing=False, **params):
    """Build a :class:`ProblemSpec` from catalog names."""
    slow = slow_potential(potential, **params)
    fast = fast or _DEFAULT_FAST.get(potential, "none")
    return ProblemSpec(
        slow=slow,
        fast=fast_potential(fast, dim=len(slow), L=L),
        sigma2=sigma2,
        eps=eps,
        x0=x0,
        name=potential,
        testing=testing,
    )


@dataclass(frozen=True)
class PotentialTemplate:
    name: str
    dim: int
    default_fast: str

    def build(self, eps=0.1, sigma2=1.0, fast=None, **kwargs):
        return problem_from_names(self.name, fast or self.default_fast, eps=eps,
                                  sigma2=sigma2, **kwargs)

    def slow(self, **params):
        return slow_potential(self.name, **params)


def builtin_potentials():
    """Catalog of named problem templates (slow potential + default fast part)."""
    return {
        name: PotentialTemplate(name, dim, _DEFAULT_FAST[name])
        for name, (dim, _) in _SLOW.items()
    }
