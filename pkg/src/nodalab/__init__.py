"""Nodal lengths of random spherical harmonics, the sample trispectrum, and the chaos
machinery connecting them."""

__version__ = "0.1.0"

from .errors import DomainError, ResolutionError, UnsupportedDegreeError  # noqa: E402
from .specfun import DegreeParams, QuadratureGrid, quadrature_grid  # noqa: E402
from .field import FieldGrid, HarmonicCoefficients, sample_coefficients, synthesize  # noqa: E402
from .geometry import NodalEstimate, nodal_length_contour, nodal_length_epsilon  # noqa: E402
from .functionals import FunctionalSample, m_ell, proj4, sample_trispectrum  # noqa: E402

__all__ = [
    "__version__",
    "DomainError",
    "ResolutionError",
    "UnsupportedDegreeError",
    "DegreeParams",
    "QuadratureGrid",
    "quadrature_grid",
    "FieldGrid",
    "HarmonicCoefficients",
    "sample_coefficients",
    "synthesize",
    "NodalEstimate",
    "nodal_length_contour",
    "nodal_length_epsilon",
    "FunctionalSample",
    "m_ell",
    "proj4",
    "sample_trispectrum",
]
