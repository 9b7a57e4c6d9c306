import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from homodens.basis import (
    HERMITE_POLY_MAX_ORDER,
    PSI0_PEAK,
    hermite_fn,
    hermite_fn_row,
    hermite_poly,
    tensor_fn,
)
from homodens.numerics import gauss_hermite_nodes

# mpmath, 50 digits: H_10(3) exp(-9/2) / sqrt(sqrt(pi) 2^10 10!)
PSI10_AT_3 = -0.42352000783766119158


@pytest.mark.parametrize("n, x, expected", [(0, 3.7, 1.0), (2, 1.0, 2.0), (3, 2.0, 40.0)])
def test_hermite_poly_values(n, x, expected):
    assert hermite_poly(n, x) == expected


def test_hermite_poly_ceiling():
    assert math.isfinite(hermite_poly(150, 0.1))
    with pytest.raises(OverflowError):
        hermite_poly(HERMITE_POLY_MAX_ORDER, 0.1)
    with pytest.raises(OverflowError):
        hermite_poly(HERMITE_POLY_MAX_ORDER + 1, 0.1)
    with pytest.raises(ValueError):
        hermite_poly(-1, 0.0)


def test_hermite_fn_values():
    assert hermite_fn(0, 0.0) == pytest.approx(0.751125544464943, abs=1e-15)
    assert hermite_fn(1, 0.0) == 0.0
    assert hermite_fn(10, 3.0) == pytest.approx(PSI10_AT_3, abs=1e-12)


def test_row_examples():
    np.testing.assert_allclose(hermite_fn_row(1, 2.0), [PSI0_PEAK * math.exp(-2.0)], rtol=1e-15)
    np.testing.assert_allclose(hermite_fn_row(3, 0.0), [PSI0_PEAK, 0.0, -PSI0_PEAK / math.sqrt(2.0)],
                               atol=1e-15)
    row = hermite_fn_row(64, 1.3)
    assert row.shape == (64,)
    np.testing.assert_allclose(row, [hermite_fn(n, 1.3) for n in range(64)], atol=1e-13, rtol=0)


def test_row_shape_broadcast():
    x = np.zeros((5, 2))
    assert hermite_fn_row(7, x).shape == (5, 2, 7)
    with pytest.raises(ValueError):
        hermite_fn_row(0, 1.0)


def test_tensor_fn():
    assert tensor_fn(0, 0, 0.0, 0.0) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-14)
    assert tensor_fn(1, 0, 0.0, 1.0) == 0.0
    assert tensor_fn(2, 3, 0.5, -0.5) == hermite_fn(2, 0.5) * hermite_fn(3, -0.5)


def test_orthonormality_gauss_hermite():
    x, w = gauss_hermite_nodes(200)
    # psi_m psi_n = exp(-x^2) * (polynomial), so divide the weight back out
    R = hermite_fn_row(64, x) * np.exp(x * x / 2)[:, None]
    G = R.T @ (w[:, None] * R)
    assert np.max(np.abs(G - np.eye(64))) < 1e-10


def test_cramer_bound_dense():
    x = np.random.default_rng(0).uniform(-20, 20, 100_000)
    assert np.max(np.abs(hermite_fn_row(128, x))) <= PSI0_PEAK + 1e-12


@given(st.integers(0, 200), st.floats(-40, 40))
def test_cramer_bound_property(n, x):
    assert abs(hermite_fn(n, x)) <= PSI0_PEAK + 1e-12


@given(st.floats(-12, 12))
def test_parity(x):
    row_p, row_m = hermite_fn_row(60, x), hermite_fn_row(60, -x)
    sign = (-1.0) ** np.arange(60)
    np.testing.assert_allclose(row_m, sign * row_p, atol=1e-13, rtol=0)


@given(st.integers(0, 30), st.floats(-6, 6))
def test_matches_raw_polynomial(n, x):
    ref = hermite_poly(n, x) * math.exp(-x * x / 2) / math.sqrt(math.sqrt(math.pi) * 2.0 ** n * math.factorial(n))
    assert hermite_fn(n, x) == pytest.approx(ref, rel=1e-10, abs=1e-14)


def test_first_entry_exact():
    x = np.linspace(-5, 5, 101)
    np.testing.assert_allclose(hermite_fn_row(4, x)[:, 0], PSI0_PEAK * np.exp(-x * x / 2), rtol=1e-15)
