import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from homodens.basis import hermite_fn_row
from homodens.estimator import (
    EmptyStreamError,
    SpectralEstimate,
    coeff_observer,
    eval_density,
    eval_density_grid,
    gamma_min,
    load_coeffs,
    quadrature_coeffs,
    save_coeffs,
    select_modes,
    select_time,
    theorem_selection,
)
from homodens.model import PolynomialPotential, ProblemSpec, TrigPotential, problem_from_names, reference_density
from homodens.numerics import Grid1D
from homodens.oracles import GaussianCase, gaussian_coeffs
from homodens.sim import SimConfig, euler_maruyama

PI_QUARTER = math.pi ** -0.25


def feed(obs, states, h=0.01):
    states = np.asarray(states, dtype=float)
    obs.update(h * np.arange(len(states)), states)
    return obs


def test_constant_stream():
    for c in (-1.3, 0.0, 2.7):
        est = feed(coeff_observer(20), np.full(500, c)).finalize()
        np.testing.assert_allclose(est.coeffs, hermite_fn_row(20, c), rtol=0, atol=1e-12)


def test_alternating_stream():
    a, b = -0.4, 1.1
    est = feed(coeff_observer(12), np.tile([a, b], 300)).finalize()
    expect = 0.5 * (hermite_fn_row(12, a) + hermite_fn_row(12, b))
    np.testing.assert_allclose(est.coeffs, expect, rtol=0, atol=1e-12)


def test_empty_stream():
    with pytest.raises(EmptyStreamError):
        coeff_observer(4).finalize()
    with pytest.raises(ValueError):
        coeff_observer(0)


def test_finalize_metadata():
    est = feed(coeff_observer(3), np.zeros(101), h=0.5).finalize(seed=3, potential="x")
    assert est.samples == 101 and est.h == 0.5 and est.T == pytest.approx(50.5)
    assert est.seed == 3 and est.potential == "x"


@given(st.lists(st.floats(-40, 40), min_size=1, max_size=50))
def test_cramer_bound_of_estimate(xs):
    est = feed(coeff_observer(30), xs).finalize()
    assert np.all(np.abs(est.coeffs) <= PI_QUARTER + 1e-12)


@pytest.mark.slow
def test_double_well_leading_coefficient():
    spec = problem_from_names("double-well", "cos", eps=0.1)
    target = quadrature_coeffs(reference_density(spec, "rho_eps"), 1)[0]
    obs = coeff_observer(4)
    euler_maruyama(spec, SimConfig(T=5000, seed=1), observers=[obs])
    assert abs(obs.finalize().coeffs[0] - target) < 0.02


def test_eval_density_examples():
    e1 = SpectralEstimate(dim=1, coeffs=[1.0, 0.0, 0.0], N=3)
    assert eval_density(e1, 0.0) == pytest.approx(PI_QUARTER, abs=1e-15)
    normal = SpectralEstimate(dim=1, coeffs=[1 / (PI_QUARTER ** -1 * math.sqrt(2)), 0, 0, 0], N=4)
    assert eval_density(normal, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-14)
    x = np.linspace(-3, 3, 7)
    np.testing.assert_allclose(normal(x), np.exp(-x * x / 2) / math.sqrt(2 * math.pi), atol=1e-14)


def test_eval_density_is_not_clipped():
    est = SpectralEstimate(dim=1, coeffs=[0.0, 1.0], N=2)
    assert eval_density(est, -1.0) < 0


def test_eval_density_2d():
    rng = np.random.default_rng(0)
    c = rng.normal(size=(5, 5))
    est = SpectralEstimate(dim=2, coeffs=c, N=5)
    x1, x2 = np.array([-0.5, 0.3]), np.array([1.2, 0.0, -2.0])
    grid = eval_density_grid(est, x1, x2)
    for i, a in enumerate(x1):
        for j, b in enumerate(x2):
            direct = hermite_fn_row(5, a) @ c @ hermite_fn_row(5, b)
            assert grid[i, j] == pytest.approx(direct, abs=1e-13)
            assert eval_density(est, [a, b]) == pytest.approx(direct, abs=1e-13)


def test_estimate_shape_checked():
    with pytest.raises(ValueError):
        SpectralEstimate(dim=2, coeffs=np.zeros(4), N=4)
    with pytest.raises(ValueError):
        SpectralEstimate(dim=1, coeffs=[np.nan], N=1)


def test_select_modes_examples():
    assert select_modes(0.1, 2 * math.pi, 1.0, gamma=5.1).N == 4
    assert select_modes(0.05, 2 * math.pi, 1.0, gamma=5.1).N == 19
    sel = select_modes(5.0, 2 * math.pi, 1.0, gamma=5.1)
    assert sel.N == 1 and sel.violated
    assert not select_modes(0.1, 2 * math.pi, 1.0, gamma=5.1).violated


def test_gamma_min_cases():
    assert gamma_min(1.0) == pytest.approx(3 + math.log(8))
    c = 1.5
    expect = c * c + max(16 * math.exp(1.5), (c / 4) * (math.log(abs(2 / c - 1)) + 2 * math.log(4)))
    assert gamma_min(2.0) == pytest.approx(expect)
    sel = select_modes(0.1, 2 * math.pi, 1.0, 2.0, 1.0, gamma_margin=1.2)
    assert sel.gamma == pytest.approx(1.2 * gamma_min(1.0)) and not sel.formal
    with pytest.raises(ValueError):
        select_modes(0.1, 2 * math.pi, 1.0, gamma_margin=0.5)


def test_select_time_examples():
    sel = select_time(0.1, l=1.0, r=2.0, kappa=1.0, zeta_margin=1.1)
    assert sel.zeta == pytest.approx(5.5)
    assert sel.T == pytest.approx(10 ** 5.5)
    assert select_time(0.1, l=2.0, r=1.0).zeta / 1.1 == pytest.approx(10.0)
    assert select_time(1.0, l=1.0, r=1.0, kappa=3.0).T == pytest.approx(3.0)


def test_select_time_formal_fallback():
    sel = select_time(0.1, l=math.inf, r=1.0, fallback_T=5000.0)
    assert sel.formal and sel.T == 5000.0
    spec = problem_from_names("double-well", "cos", eps=0.1)
    sel = theorem_selection(spec, fallback_N=16, fallback_T=5000.0)
    assert sel.formal and sel.N == 16 and sel.T == 5000.0


def test_quadrature_coeffs_standard_normal():
    spec = problem_from_names("quadratic", "none", eps=1.0, mu=0.0)
    a = quadrature_coeffs(reference_density(spec, "rho"), 8)
    expect = np.zeros(8)
    expect[0] = PI_QUARTER / math.sqrt(2)
    np.testing.assert_allclose(a, expect, rtol=0, atol=1e-10)


def test_quadrature_coeffs_shifted_gaussian():
    spec = problem_from_names("quadratic", "none", eps=1.0, mu=1.0)
    a = quadrature_coeffs(reference_density(spec, "rho"), 30)
    n = np.arange(30)
    closed = PI_QUARTER / math.sqrt(2) * math.exp(-0.25) / np.sqrt([2.0 ** k * math.factorial(k) for k in n])
    np.testing.assert_allclose(a, closed, rtol=0, atol=1e-9)
    np.testing.assert_allclose(a, gaussian_coeffs(30, GaussianCase(1.0, 1.0)), rtol=0, atol=1e-9)


def test_quadrature_coeffs_double_well_odd_vanish():
    spec = problem_from_names("double-well", "cos", eps=0.1)
    for kind in ("rho", "rho_eps"):
        a = quadrature_coeffs(reference_density(spec, kind), 24)
        assert np.max(np.abs(a[1::2])) < 1e-10
        assert abs(a[0]) > 0.1


def test_merge_is_weighted_average():
    spec = problem_from_names("double-well", "cos", eps=0.1)
    a, b, both = coeff_observer(10), coeff_observer(10), coeff_observer(10)
    euler_maruyama(spec, SimConfig(T=3, seed=1), observers=[a, both])
    euler_maruyama(spec, SimConfig(T=7, seed=2), observers=[b, both])
    ea, eb = a.finalize(), b.finalize()
    merged = coeff_observer(10).merge(a).merge(b).finalize()
    w = ea.T / (ea.T + eb.T)
    np.testing.assert_allclose(merged.coeffs, w * ea.coeffs + (1 - w) * eb.coeffs, rtol=0, atol=1e-12)
    np.testing.assert_allclose(merged.coeffs, both.finalize().coeffs, rtol=0, atol=1e-12)
    assert merged.T == pytest.approx(ea.T + eb.T)
    with pytest.raises(ValueError):
        coeff_observer(4).merge(coeff_observer(5))


def test_plancherel():
    spec = problem_from_names("double-well", "cos", eps=0.1)
    N = 16
    target = quadrature_coeffs(reference_density(spec, "rho_eps"), N)
    obs = coeff_observer(N)
    euler_maruyama(spec, SimConfig(T=100, seed=8), observers=[obs])
    est = obs.finalize()
    grid = Grid1D(-12.0, 12.0, 4801)
    x = grid.points()
    diff = hermite_fn_row(N, x) @ (est.coeffs - target)
    on_grid = np.sum(diff ** 2) * grid.spacing
    assert on_grid == pytest.approx(np.sum((est.coeffs - target) ** 2), rel=0.01)


def test_variance_decay():
    # OU paths with the exact stationary start; eight seeds per horizon
    def spread(T):
        vals = []
        for seed in range(100, 108):
            spec = ProblemSpec(PolynomialPotential((0.0, 0.0, 0.5)), TrigPotential(), sigma2=1.0, eps=1.0,
                               x0=np.random.default_rng(seed).normal())
            obs = coeff_observer(1)
            euler_maruyama(spec, SimConfig(T=T, h=0.01, seed=seed), observers=[obs])
            vals.append(obs.finalize().coeffs[0])
        return np.std(vals, ddof=1)

    assert spread(400.0) <= 0.7 * spread(100.0)


def test_2d_odd_modes_decay():
    spec = problem_from_names("2d-example", "sin", eps=0.1, sigma2=2.25)
    target = quadrature_coeffs(reference_density(spec, "rho_eps"), 8)
    assert np.max(np.abs(target[:, 1::2])) < 1e-10

    def odd_part(T):
        obs = coeff_observer(8, 2)
        euler_maruyama(spec, SimConfig(T=T, seed=1), observers=[obs])
        return np.abs(obs.finalize().coeffs[:, 1::2])

    short, long = odd_part(50.0), odd_part(800.0)
    assert long.max() < 0.02
    assert long.mean() < short.mean()


def test_coeff_file_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    for est in (SpectralEstimate(dim=1, coeffs=rng.normal(size=7), N=7, T=10.0, eps=0.1, h=1e-3, seed=5,
                                 potential="double-well", samples=10001),
                SpectralEstimate(dim=2, coeffs=rng.normal(size=(3, 3)), N=3)):
        path = tmp_path / f"c{est.dim}.json"
        save_coeffs(est, path)
        back = load_coeffs(path)
        assert np.array_equal(back.coeffs, est.coeffs)
        assert back.to_json() == est.to_json()
        data = json.loads(path.read_text())
        assert set(data) == {"dim", "N", "T", "eps", "h", "seed", "potential", "samples", "coeffs"}
