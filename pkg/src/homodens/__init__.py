"""Hermite spectral estimation of homogenized invariant densities from
multiscale Langevin trajectories."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("homodens")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .basis import hermite_fn, hermite_fn_row, hermite_poly, tensor_fn
from .estimator import (
    CoeffObserver,
    SpectralEstimate,
    coeff_observer,
    eval_density,
    quadrature_coeffs,
    select_modes,
    select_time,
)
from .model import ProblemSpec, homogenize, problem_from_names, reference_density
from .sim import SimConfig, euler_maruyama
from .spectral import dominant_frequency, ft_estimate, infer_eps

__all__ = [
    "__version__",
    "hermite_fn",
    "hermite_fn_row",
    "hermite_poly",
    "tensor_fn",
    "CoeffObserver",
    "SpectralEstimate",
    "coeff_observer",
    "eval_density",
    "quadrature_coeffs",
    "select_modes",
    "select_time",
    "ProblemSpec",
    "homogenize",
    "problem_from_names",
    "reference_density",
    "SimConfig",
    "euler_maruyama",
    "dominant_frequency",
    "ft_estimate",
    "infer_eps",
]
