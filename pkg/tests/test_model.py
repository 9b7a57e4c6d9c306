import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from homodens.basis import hermite_fn
from homodens.estimator import quadrature_coeffs
from homodens.model import (
    CatalogError,
    DivergenceError,
    PolynomialPotential,
    ProblemSpec,
    TrigPotential,
    builtin_potentials,
    homogenize,
    problem_from_names,
    reference_density,
)
from homodens.numerics import quad_adaptive

TWO_PI = 2 * math.pi
# Bessel oracle, mpmath: 1/I0(1)^2, 2 pi I0(1), 1/I0(1/4)^2
K_COS_UNIT = 0.62386036043206919
PI_COS_UNIT = 7.9549265210128453
K_COS_S4 = 0.96935074113636643


def test_homogenize_constant_fast():
    hm = homogenize(lambda y: 0.0, TWO_PI, 1.7)
    assert hm.Pi == pytest.approx(TWO_PI, rel=1e-12)
    assert hm.PiHat == pytest.approx(TWO_PI, rel=1e-12)
    assert hm.K == 1.0
    assert hm.Sigma == 1.7


def test_homogenize_cos_bessel():
    hm = homogenize(math.cos, TWO_PI, 1.0)
    assert hm.Pi == pytest.approx(PI_COS_UNIT, abs=1e-9)
    assert hm.PiHat == pytest.approx(PI_COS_UNIT, abs=1e-9)
    assert hm.K == pytest.approx(K_COS_UNIT, abs=1e-10)
    assert hm.Sigma == hm.K * 1.0


def test_homogenize_cos_sigma4():
    hm = homogenize(math.cos, TWO_PI, 4.0)
    assert hm.K == pytest.approx(K_COS_S4, abs=1e-10)
    assert hm.Sigma == hm.K * 4.0


def test_homogenize_rejects():
    with pytest.raises(ValueError):
        homogenize(math.cos, TWO_PI, 0.0)
    with pytest.raises(ValueError):
        homogenize(math.cos, -1.0, 1.0)


@given(st.floats(-5, 5), st.floats(0.3, 3.0))
def test_K_invariant_under_shift(c, sigma2):
    a = homogenize(lambda y: math.cos(y) + 0.3 * math.sin(2 * y), TWO_PI, sigma2).K
    b = homogenize(lambda y: math.cos(y) + 0.3 * math.sin(2 * y) + c, TWO_PI, sigma2).K
    assert b == pytest.approx(a, abs=1e-10)


@given(st.lists(st.floats(-2, 2), min_size=1, max_size=3), st.floats(0.2, 4.0))
def test_K_in_unit_interval(coeffs, sigma2):
    p = TrigPotential(cos_coeffs=tuple(coeffs))
    K = homogenize(p, p.period, sigma2).K
    assert 0 < K <= 1
    if p.is_constant:
        assert K == 1.0


def test_potentials_vanish_at_origin():
    V = PolynomialPotential((3.0, 1.0, 2.0))
    assert V(0.0) == 0.0
    p = TrigPotential(cos_coeffs=(1.0, 0.5), sin_coeffs=(0.2,))
    assert p(0.0) == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(p(np.linspace(0, 5, 7) + TWO_PI), p(np.linspace(0, 5, 7)), atol=1e-12)


def test_problem_spec_validation():
    V, p = PolynomialPotential((0, 0, 0.5)), TrigPotential((1.0,))
    with pytest.raises(ValueError):
        ProblemSpec(V, p, sigma2=0.0, eps=0.1)
    ProblemSpec(V, p, sigma2=0.0, eps=0.1, testing=True)
    with pytest.raises(ValueError):
        ProblemSpec(V, p, sigma2=1.0, eps=0.0)

    class NotPeriodic:
        period, name = 1.0, "ramp"

        def __call__(self, y):
            return np.asarray(y) * 1.0

    with pytest.raises(ValueError, match="periodic"):
        ProblemSpec(V, NotPeriodic(), sigma2=1.0, eps=0.1)


def test_catalog_examples():
    cat = builtin_potentials()
    assert {"quadratic", "double-well", "2d-example"} <= set(cat)
    dw = problem_from_names("double-well")
    assert dw.V(1.0) == pytest.approx(-0.25)
    q = problem_from_names("quadratic", mu=0.7)
    assert q.slow[0].derivative(0.7) == pytest.approx(0.0, abs=1e-15)
    two = problem_from_names("2d-example")
    assert two.dim == 2
    assert two.p(np.array([math.pi / 2, math.pi / 2])) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(CatalogError) as info:
        problem_from_names("triple-well")
    assert "double-well" in str(info.value)


def test_gaussian_reference():
    spec = problem_from_names("quadratic", "none", sigma2=1.0)
    rho = reference_density(spec)
    assert rho.normalization == pytest.approx(math.sqrt(TWO_PI), rel=1e-10)
    x = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(rho(x), np.exp(-x * x / 2) / math.sqrt(TWO_PI), rtol=1e-10)


def test_double_well_symmetric():
    rho = reference_density(problem_from_names("double-well"))
    x = np.linspace(-3, 3, 601)
    np.testing.assert_allclose(rho(x), rho(-x), rtol=0, atol=1e-12)


@pytest.mark.parametrize("kind", ["rho", "rho_eps"])
@pytest.mark.parametrize("name, sigma2", [("double-well", 1.0), ("quadratic", 0.5), ("double-well", 2.25)])
def test_normalized_and_positive(name, sigma2, kind):
    d = reference_density(problem_from_names(name, eps=0.1, sigma2=sigma2), kind)
    lo, hi = d.domain
    mass = integrate.quad(d, lo, hi, limit=2000, points=np.linspace(lo, hi, 41)[1:-1], epsabs=1e-12)[0]
    assert mass == pytest.approx(1.0, abs=1e-8)
    assert np.all(d(np.linspace(lo, hi, 2001)) > 0)


def test_2d_normalization_tensor_quadrature():
    spec = problem_from_names("2d-example", eps=0.1, sigma2=2.25)
    for kind in ("rho", "rho_eps"):
        d = reference_density(spec, kind)
        (a1, b1), (a2, b2) = d.domain
        x1 = np.linspace(a1, b1, 3001)
        x2 = np.linspace(a2, b2, 3001)
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        mass = integrate.simpson(integrate.simpson(d(X1, X2), x=x2, axis=1), x=x1)
        assert mass == pytest.approx(1.0, abs=1e-8)


def test_Z_eps_limit_trend():
    spec = problem_from_names("double-well", "cos", eps=0.1)
    Z = reference_density(spec).normalization
    hm = homogenize(spec.fast[0], spec.L, spec.sigma2)
    target = Z * hm.Pi / spec.L
    gaps = [abs(reference_density(problem_from_names("double-well", "cos", eps=e), "rho_eps").normalization - target)
            for e in (0.2, 0.1, 0.05)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_weak_convergence_of_coefficients():
    rho = quadrature_coeffs(reference_density(problem_from_names("double-well", eps=0.1)), 9)
    errs = np.array([np.abs(quadrature_coeffs(
        reference_density(problem_from_names("double-well", eps=e), "rho_eps"), 9) - rho)
        for e in (0.2, 0.1, 0.05)])
    # odd orders vanish identically by symmetry; compare the even ones
    even = errs[:, ::2]
    assert np.all(even[0] > even[1]) and np.all(even[1] > even[2])


def test_non_confining_rejected():
    V = PolynomialPotential((0, 0, -0.5))
    spec = ProblemSpec(V, TrigPotential(), sigma2=1.0, eps=0.1)
    with pytest.raises(DivergenceError):
        reference_density(spec)


def test_assumption_constants():
    L_V, beta, R = PolynomialPotential((0, -0.7, 0.5)).assumption_constants()
    assert L_V == 1.0 and R >= 1 and beta > 0
    L_V, beta, R = PolynomialPotential((0, 0, -0.5, 0, 0.25)).assumption_constants()
    assert math.isinf(L_V)
    assert problem_from_names("double-well").theorem_constants()[3] is True


def test_psi_projection_of_gaussian_is_psi0():
    d = reference_density(problem_from_names("quadratic", "none"))
    r = quad_adaptive(lambda x: hermite_fn(0, x) * float(d(x)))
    assert r.value == pytest.approx(1 / (math.pi ** 0.25 * math.sqrt(2)), abs=1e-12)
