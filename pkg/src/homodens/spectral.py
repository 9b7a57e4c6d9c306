"""Fourier transform of a Hermite series and inference of the fast scale.

Hermite functions are eigenfunctions of the Fourier transform, so with the
convention ``F g(xi) = int g(x) exp(-2 pi i xi x) dx`` the transform of
``sum_n a_n psi_n`` is the explicit N-term sum

    F(xi) = sqrt(2 pi) sum_n (-i)^n a_n psi_n(2 pi xi).

A periodic fast potential of period ``L eps`` leaves a spectral line at
``xi = 1 / (L eps)`` once the series has enough modes to resolve it, and
``eps`` is read back from the position of that line.

Peak rule
---------
The slow density itself has structure well away from zero frequency (a
double well produces a side lobe near ``xi = 0.4``), so the search skips
``xi < 1 / (L eps_max)`` with ``eps_max = 0.25`` by default, i.e. it only
looks for fast periods shorter than a quarter of ``L``.  A local maximum
counts as dominant when its magnitude is at least twice the background,
taken as the median magnitude over the band ``[0, sqrt(2N + 1) / (2 pi)]``
that an N-term series can resolve.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .basis import hermite_fn_row

__all__ = [
    "EPS_MAX",
    "PEAK_RATIO_THRESHOLD",
    "NoDominantFrequency",
    "Peak",
    "FrequencyScan",
    "DominantFrequency",
    "ft_estimate",
    "resolvable_band",
    "scan_spectrum",
    "dominant_frequency",
    "infer_eps",
    "write_scan",
]

EPS_MAX = 0.25
PEAK_RATIO_THRESHOLD = 2.0
_GRID_DIVISIONS = 2048


def _coeff_vector(coeffs):
    a = np.asarray(getattr(coeffs, "coeffs", coeffs), dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("expected a non-empty 1D coefficient vector")
    if not np.all(np.isfinite(a)):
        raise ValueError("coefficients must be finite")
    return a


def ft_estimate(coeffs, xi):
    """Fourier transform of the Hermite series with coefficients `coeffs`.

    Parameters
    ----------
    coeffs : array_like or SpectralEstimate
        1D coefficient vector ``a_0, ..., a_{N-1}``
    xi : float or array_like
        frequencies in cycles per unit x

    Returns
    -------
    complex or numpy.ndarray of complex
    """
    a = _coeff_vector(coeffs)
    phase = np.array([1.0, -1j, -1.0, 1j])[np.arange(a.size) % 4]
    val = math.sqrt(2.0 * math.pi) * (hermite_fn_row(a.size, 2.0 * math.pi * np.asarray(xi, dtype=float)) @ (phase * a))
    return val if np.ndim(val) else complex(val)


def resolvable_band(N):
    """Highest frequency an N-term Hermite series can carry, ``sqrt(2N+1)/(2 pi)``."""
    return math.sqrt(2.0 * N + 1.0) / (2.0 * math.pi)


@dataclass(frozen=True)
class Peak:
    xi: float
    magnitude: float
    ratio: float


@dataclass
class FrequencyScan:
    """Magnitude of the transform on a uniform frequency grid.

    ``peaks`` lists the local maxima at or beyond the exclusion radius,
    largest first, with parabolically refined positions.
    """

    xi_grid: np.ndarray
    magnitudes: np.ndarray
    exclusion_radius: float
    background: float
    N: int
    peaks: list = field(default_factory=list)

    @property
    def top_peaks(self):
        return self.peaks[:3]

    @property
    def best(self):
        return self.peaks[0] if self.peaks else None

    def ratio_near(self, xi, half_width):
        """Largest magnitude within `half_width` of `xi`, over the background."""
        window = np.abs(self.xi_grid - xi) <= half_width
        if not window.any():
            raise ValueError(f"no grid point within {half_width} of xi={xi}")
        return float(self.magnitudes[window].max() / self.background)


@dataclass(frozen=True)
class DominantFrequency:
    xi_bar: float
    magnitude: float
    peak_ratio: float
    top_peaks: tuple
    scan: FrequencyScan


class NoDominantFrequency(RuntimeError):
    """No local maximum beyond the exclusion radius clears the background.

    Usually the series has too few modes to resolve the fast scale.  The
    scan is attached for diagnosis.
    """

    def __init__(self, message, scan):
        super().__init__(message)
        self.scan = scan


def _parabolic(m, i):
    # vertex of the parabola through (i-1, i, i+1), as an offset in grid units
    denom = m[i - 1] - 2.0 * m[i] + m[i + 1]
    if denom == 0.0:
        return 0.0, m[i]
    off = 0.5 * (m[i - 1] - m[i + 1]) / denom
    return off, m[i] - 0.25 * (m[i - 1] - m[i + 1]) * off


def scan_spectrum(coeffs, xi_max=None, grid_step=None, exclusion_radius=None,
                  L=2.0 * math.pi, eps_max=EPS_MAX):
    """Evaluate ``|F|`` on ``[0, xi_max]`` and collect the candidate peaks.

    Parameters
    ----------
    coeffs : array_like or SpectralEstimate
        1D coefficient vector
    xi_max : float, optional
        upper end of the grid; defaults to ``N / pi``
    grid_step : float, optional
        grid spacing; defaults to ``xi_max / 2048``
    exclusion_radius : float, optional
        frequencies below this are ignored in the peak search; defaults
        to ``1 / (L eps_max)``
    L : float
        period of the fast potential
    eps_max : float
        largest scale separation the default exclusion radius admits

    Returns
    -------
    FrequencyScan
    """
    a = _coeff_vector(coeffs)
    N = a.size
    if xi_max is None:
        xi_max = N / math.pi
    if grid_step is None:
        grid_step = xi_max / _GRID_DIVISIONS
    if exclusion_radius is None:
        exclusion_radius = 1.0 / (L * eps_max)
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    if not xi_max > exclusion_radius > 0:
        raise ValueError(f"need xi_max > exclusion_radius > 0, got {xi_max} and {exclusion_radius}")

    count = int(math.floor(xi_max / grid_step + 1e-9)) + 1
    xi = grid_step * np.arange(count)
    m = np.abs(ft_estimate(a, xi))

    band = xi <= max(resolvable_band(N), xi[min(2, count - 1)])
    background = float(np.median(m[band]))

    inner = np.arange(1, count - 1)
    is_max = (m[inner] > m[inner - 1]) & (m[inner] >= m[inner + 1]) & (xi[inner] >= exclusion_radius)
    peaks = []
    for i in inner[is_max]:
        off, height = _parabolic(m, i)
        ratio = height / background if background > 0 else math.inf
        peaks.append(Peak(float(xi[i] + off * grid_step), float(height), float(ratio)))
    peaks.sort(key=lambda p: -p.magnitude)
    return FrequencyScan(xi_grid=xi, magnitudes=m, exclusion_radius=float(exclusion_radius),
                         background=background, N=N, peaks=peaks)


def dominant_frequency(coeffs, xi_max=None, grid_step=None, exclusion_radius=None,
                       L=2.0 * math.pi, eps_max=EPS_MAX, threshold=PEAK_RATIO_THRESHOLD):
    """Most significant non-zero frequency of the Hermite series.

    Takes the largest local maximum of ``|F|`` beyond the exclusion radius
    (see :func:`scan_spectrum` for the grid arguments).

    Raises
    ------
    NoDominantFrequency
        if that maximum is below `threshold` times the background.
    """
    scan = scan_spectrum(coeffs, xi_max, grid_step, exclusion_radius, L, eps_max)
    best = scan.best
    if best is None or best.ratio < threshold:
        got = "no local maximum" if best is None else f"best ratio {best.ratio:.3g} at xi={best.xi:.4g}"
        raise NoDominantFrequency(
            f"no dominant frequency beyond xi={scan.exclusion_radius:.4g} "
            f"({got}; threshold {threshold:g}); N={scan.N} may be too small", scan)
    return DominantFrequency(best.xi, best.magnitude, best.ratio, tuple(scan.top_peaks), scan)


def infer_eps(xi_bar, L):
    """Scale separation ``1 / (L xi_bar)`` implied by a spectral line at `xi_bar`."""
    if not (xi_bar > 0 and L > 0):
        raise ValueError("xi_bar and L must be positive")
    return 1.0 / (L * xi_bar)


def write_scan(scan, path, L=2.0 * math.pi, threshold=PEAK_RATIO_THRESHOLD):
    """Write ``xi,magnitude`` rows to `path` and a JSON sidecar next to it.

    The sidecar (``<path>.json``) holds ``xi_bar``, ``eps_hat`` and
    ``peak_ratio``; the first two are null when no peak clears `threshold`.
    Returns the sidecar path.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["xi", "magnitude"])
        for x, v in zip(scan.xi_grid, scan.magnitudes):
            w.writerow([repr(float(x)), repr(float(v))])
    best = scan.best
    found = best is not None and best.ratio >= threshold
    side = {
        "xi_bar": best.xi if found else None,
        "eps_hat": infer_eps(best.xi, L) if found else None,
        "peak_ratio": best.ratio if best is not None else None,
        "exclusion_radius": scan.exclusion_radius,
        "background": scan.background,
        "top_peaks": [{"xi": p.xi, "magnitude": p.magnitude, "ratio": p.ratio} for p in scan.top_peaks],
    }
    side_path = f"{path}.json"
    with open(side_path, "w", encoding="utf-8") as fh:
        json.dump(side, fh, indent=1)
        fh.write("\n")
    return side_path
