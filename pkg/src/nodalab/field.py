"""Sampling and synthesis of Gaussian random spherical harmonics and their gradients.

The basis is the real orthonormal one: Y_{l0} = Pbar_l0, and for m > 0
Y_{lm} = sqrt(2) Pbar_lm cos(m phi), Y_{l,-m} = sqrt(2) Pbar_lm sin(m phi), where
Pbar_lm are associated Legendre functions normalised so that
int_{S^2} Y_lm^2 = 1 (no Condon-Shortley phase).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DomainError, ResolutionError
from .specfun import DegreeParams, QuadratureGrid, gaussian_quantile, quadrature_grid

__all__ = [
    "HarmonicCoefficients",
    "FieldGrid",
    "sample_coefficients",
    "normalized_alf",
    "synthesize",
    "eval_point",
    "eval_value",
    "write_field_csv",
]

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class HarmonicCoefficients:
    """Coefficients a_{l,m}, stored at index m + l for m = -l..l."""

    params: DegreeParams
    a: np.ndarray

    def __post_init__(self):
        if self.a.shape != (2 * self.params.ell + 1,):
            raise DomainError(f"expected {2 * self.params.ell + 1} coefficients, got {self.a.shape}")

    def cos_sin(self) -> tuple[np.ndarray, np.ndarray]:
        """Weights of Pbar_lm cos(m phi) and Pbar_lm sin(m phi), m = 0..l, including sqrt(2)."""
        ell = self.params.ell
        c = self.a[ell:].copy()
        s = np.zeros(ell + 1)
        if ell:
            s[1:] = self.a[ell - 1 :: -1]
        c[1:] *= math.sqrt(2.0)
        s[1:] *= math.sqrt(2.0)
        return c, s

    @property
    def amplitude(self) -> float:
        """sqrt(4 pi / (2l + 1)), the factor giving unit pointwise variance."""
        return math.sqrt(4.0 * math.pi / (2 * self.params.ell + 1))


@dataclass(frozen=True)
class FieldGrid:
    """Field values and orthonormal gradient components on a quadrature grid.

    ``d1`` is d/dtheta and ``d2`` is (1/sin theta) d/dphi; arrays have shape
    (n_theta, n_phi). Both are None when synthesized without gradients.
    """

    grid: QuadratureGrid
    f: np.ndarray
    d1: Optional[np.ndarray]
    d2: Optional[np.ndarray]
    coeffs: HarmonicCoefficients

    @property
    def params(self) -> DegreeParams:
        return self.coeffs.params

    @property
    def has_gradients(self) -> bool:
        return self.d1 is not None and self.d2 is not None

    def require_gradients(self) -> None:
        if not self.has_gradients:
            raise DomainError("field was synthesized without gradients")


def sample_coefficients(params: DegreeParams, master_seed: int, replicate: int) -> HarmonicCoefficients:
    """Draw 2l+1 i.i.d. standard normal coefficients.

    Uniforms come from a Philox counter-based stream keyed by
    (master_seed, l, replicate); each 53-bit uniform k is mapped to the open
    interval as (k + 1/2) 2^-53 and pushed through the Gaussian quantile.
    """
    seq = np.random.SeedSequence([int(master_seed) & _SEED_MASK, params.ell, int(replicate) & _SEED_MASK])
    bits = np.random.Generator(np.random.Philox(seq)).integers(0, 1 << 53, size=2 * params.ell + 1, dtype=np.uint64)
    uniforms = (bits.astype(np.float64) + 0.5) * 2.0**-53
    return HarmonicCoefficients(params, np.asarray(gaussian_quantile(uniforms), dtype=float))


def _alf_rows(ell: int, x: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pbar_{ell, m} and Pbar_{ell-1, m} for m = 0..ell, shape (ell + 1, x.size)."""
    n = x.size
    prev2 = np.zeros((ell + 1, n))
    prev1 = np.zeros((ell + 1, n))
    sectoral = np.full(n, 1.0 / math.sqrt(4.0 * math.pi))
    cur = prev1
    for l in range(ell + 1):
        cur = np.zeros((ell + 1, n))
        if l >= 1:
            sectoral = math.sqrt((2 * l + 1) / (2.0 * l)) * s * sectoral
            # Pbar_{l, l-1} from Pbar_{l-1, l-1}
            cur[l - 1] = math.sqrt(2 * l + 1) * x * prev1[l - 1]
        cur[l] = sectoral
        if l >= 2:
            m = np.arange(l - 1)
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            cur[: l - 1] = a[:, None] * (x * prev1[: l - 1] - b[:, None] * prev2[: l - 1])
        prev2, prev1 = prev1, cur
    return cur, prev2


def normalized_alf(ell: int, x: np.ndarray, derivative: bool = True) -> tuple[np.ndarray, np.ndarray | None]:
    """Orthonormal associated Legendre functions Pbar_{ell,m}(x), m = 0..ell, and d/dtheta.

    The derivative needs sin(theta) > 0 at every point.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    p, p_lower = _alf_rows(ell, x, s)
    if not derivative:
        return p, None
    if np.any(s == 0.0):
        raise DomainError("theta derivative is undefined at the poles")
    m = np.arange(ell + 1)
    if ell == 0:
        return p, np.zeros_like(p)
    c = np.sqrt((2.0 * ell + 1.0) / (2.0 * ell - 1.0) * (ell * ell - m * m))
    dp = (ell * x * p - c[:, None] * p_lower) / s
    return p, dp


@lru_cache(maxsize=16)
def _grid_tables(ell: int, n_theta: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    grid = quadrature_grid(n_theta, 1)
    p, dp = normalized_alf(ell, grid.colat_nodes)
    s = np.sqrt(1.0 - grid.colat_nodes**2)
    # stored transposed: rows are latitudes
    tables = (p.T.copy(), dp.T.copy(), (p / s).T.copy())
    for t in tables:
        t.setflags(write=False)
    return tables


def _rows_to_grid(profile: np.ndarray, n_phi: int) -> np.ndarray:
    """Real Fourier synthesis along longitude: sum_m Re(profile[:, m] e^{i m phi})."""
    ell = profile.shape[1] - 1
    spec = np.zeros((profile.shape[0], n_phi // 2 + 1), dtype=complex)
    spec[:, 0] = profile[:, 0]
    spec[:, 1 : ell + 1] = 0.5 * profile[:, 1:]
    return np.fft.irfft(spec, n=n_phi, axis=1) * n_phi


def synthesize(coeffs: HarmonicCoefficients, grid: QuadratureGrid, gradients: bool = True) -> FieldGrid:
    """Evaluate f, d/dtheta f and (1/sin theta) d/dphi f on every grid node."""
    ell = coeffs.params.ell
    if grid.exact_degree < ell or grid.n_phi < 2 * ell + 1:
        raise ResolutionError(
            f"grid too coarse for degree {ell}: need n_theta >= {(ell + 2) // 2} "
            f"and n_phi >= {2 * ell + 1}, got {grid.n_theta} x {grid.n_phi}"
        )
    p, dp, p_over_s = _grid_tables(ell, grid.n_theta)
    c, s = coeffs.cos_sin()
    # sum_m w_m e^{i m phi} with real part c_m cos + s_m sin
    w = (c - 1j * s) * coeffs.amplitude
    m = np.arange(ell + 1)
    f = _rows_to_grid(p * w, grid.n_phi)
    if not gradients:
        return FieldGrid(grid, f, None, None, coeffs)
    d1 = _rows_to_grid(dp * w, grid.n_phi)
    d2 = _rows_to_grid(p_over_s * (1j * m * w), grid.n_phi)
    return FieldGrid(grid, f, d1, d2, coeffs)


def _point_sums(coeffs: HarmonicCoefficients, theta, phi, derivative: bool):
    ell = coeffs.params.ell
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    theta, phi = np.broadcast_arrays(theta, phi)
    shape = theta.shape
    theta, phi = theta.ravel(), phi.ravel()
    p, dp = normalized_alf(ell, np.cos(theta), derivative=derivative)
    c, s = coeffs.cos_sin()
    m = np.arange(ell + 1)[:, None]
    cos_mp, sin_mp = np.cos(m * phi), np.sin(m * phi)
    amp = coeffs.amplitude
    f = amp * np.sum(p * (c[:, None] * cos_mp + s[:, None] * sin_mp), axis=0)
    if not derivative:
        return f.reshape(shape), None, None
    d1 = amp * np.sum(dp * (c[:, None] * cos_mp + s[:, None] * sin_mp), axis=0)
    d2 = amp * np.sum(p * m * (s[:, None] * cos_mp - c[:, None] * sin_mp), axis=0) / np.sin(theta)
    return f.reshape(shape), d1.reshape(shape), d2.reshape(shape)


def eval_point(coeffs: HarmonicCoefficients, theta, phi):
    """(f, d1, d2) at colatitude ``theta`` and longitude ``phi``; poles are excluded."""
    th = np.asarray(theta, dtype=float)
    if np.any((th <= 0.0) | (th >= math.pi)):
        raise DomainError("gradient components are undefined at the poles; need 0 < theta < pi")
    f, d1, d2 = _point_sums(coeffs, theta, phi, derivative=True)
    if np.ndim(theta) == 0 and np.ndim(phi) == 0:
        return float(f[0]), float(d1[0]), float(d2[0])
    return f, d1, d2


def eval_value(coeffs: HarmonicCoefficients, theta, phi):
    """Field value only; valid at the poles as well."""
    f, _, _ = _point_sums(coeffs, theta, phi, derivative=False)
    if np.ndim(theta) == 0 and np.ndim(phi) == 0:
        return float(f[0])
    return f


def write_field_csv(field: FieldGrid, path: str | Path) -> None:
    field.require_gradients()
    theta = field.grid.theta
    phi = field.grid.phi
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta", "phi", "f", "d1", "d2"])
        for i, th in enumerate(theta):
            for j, ph in enumerate(phi):
                writer.writerow([repr(float(th)), repr(float(ph)), repr(float(field.f[i, j])),
                                 repr(float(field.d1[i, j])), repr(float(field.d2[i, j]))])
