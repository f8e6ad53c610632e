"""Spectral functionals of a synthesized field: the sample trispectrum, its rescaling M,
and the fourth-order chaos component of the nodal length."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chaos import FOURTH_CHAOS_TERMS
from .errors import DomainError, ResolutionError
from .field import FieldGrid
from .specfun import DegreeParams, hermite

__all__ = [
    "FunctionalSample",
    "check_band_limit",
    "sample_trispectrum",
    "m_ell",
    "proj4",
    "functional_sample",
]


@dataclass(frozen=True)
class FunctionalSample:
    """Scalar outputs of one replicate."""

    ell: int
    nodal_length: float
    h4: float
    m: float
    proj4: float
    replicate: int
    seed: int

    def __post_init__(self):
        # nodal_length and proj4 are NaN when a campaign skips them; infinities are never valid
        values = (self.nodal_length, self.h4, self.m, self.proj4)
        if any(math.isinf(v) for v in values) or math.isnan(self.h4) or math.isnan(self.m):
            raise DomainError(f"non-finite functional in replicate {self.replicate}: {values}")


def check_band_limit(field: FieldGrid) -> None:
    """Quartic integrands reach degree 4l; refuse grids that cannot integrate them exactly."""
    ell = field.params.ell
    grid = field.grid
    need_theta = 2 * ell + 1
    need_phi = 4 * ell + 1
    if grid.n_theta < need_theta or grid.n_phi < need_phi:
        raise ResolutionError(
            f"quartic functionals at degree {ell} need n_theta >= {need_theta} and "
            f"n_phi >= {need_phi} for exact quadrature, got {grid.n_theta} x {grid.n_phi}"
        )


def sample_trispectrum(field: FieldGrid) -> float:
    """h4 = integral of H4(f) over the sphere, exact on a grid resolving degree 4l."""
    check_band_limit(field)
    return field.grid.integrate(hermite(4, field.f))


def m_ell(h4: float, params: DegreeParams) -> float:
    """M = -(1/4) sqrt(lam/2) (1/4!) h4."""
    return -0.25 * params.grad_scale * h4 / 24.0


def proj4(field: FieldGrid) -> float:
    """Fourth-order chaos component of the nodal length.

    sqrt(lam/2) times the integral of
    sum_k c_k H_a(f) H_b(d1/sigma) H_c(d2/sigma) with sigma = sqrt(lam/2).
    """
    check_band_limit(field)
    field.require_gradients()
    params = field.params
    if params.ell < 1:
        raise DomainError("proj4 requires ell >= 1 (the gradient vanishes at ell = 0)")
    sigma = params.grad_scale
    u1 = field.d1 / sigma
    u2 = field.d2 / sigma
    cache: dict[tuple[int, int], np.ndarray] = {}

    def h(order: int, which: int, values: np.ndarray) -> np.ndarray:
        key = (which, order)
        if key not in cache:
            cache[key] = hermite(order, values)
        return cache[key]

    integrand = np.zeros_like(field.f)
    for coef, (a, b, c) in FOURTH_CHAOS_TERMS:
        integrand += coef * h(a, 0, field.f) * h(b, 1, u1) * h(c, 2, u2)
    return sigma * field.grid.integrate(integrand)


def functional_sample(field: FieldGrid, nodal_length: float, seed: int, replicate: int) -> FunctionalSample:
    """Collect one replicate; proj4 is NaN for fields synthesized without gradients."""
    h4 = sample_trispectrum(field)
    return FunctionalSample(
        ell=field.params.ell,
        nodal_length=float(nodal_length),
        h4=h4,
        m=m_ell(h4, field.params),
        proj4=proj4(field) if field.has_gradients else math.nan,
        replicate=int(replicate),
        seed=int(seed),
    )
