"""Wiener-chaos coefficients of the Euclidean norm and the Dirac delta, and the diagram formula."""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DomainError, UnsupportedDegreeError

__all__ = [
    "swinging_p",
    "alpha",
    "beta",
    "hermite_product_expectation",
    "FOURTH_CHAOS_TERMS",
]

SWINGING_MAX = 12
BETA_MAX = 8
DIAGRAM_MAX_ORDER = 4
DIAGRAM_MAX_TOTAL = 12
PSD_FLOOR = -1e-10


def _swinging_coefficients(n: int) -> list[int]:
    sign = -1 if n % 2 else 1
    return [
        sign * (-1) ** j * math.comb(n, j) * math.factorial(2 * j + 1) // math.factorial(j) ** 2
        for j in range(n + 1)
    ]


def swinging_p(n: int, x: float) -> float:
    """Swinging factorial polynomial p_n(x) = sum_j (-1)^(j+n) C(n,j) (2j+1)!/(j!)^2 x^j."""
    if int(n) != n or n < 0:
        raise DomainError(f"n must be a nonnegative integer, got {n}")
    if n > SWINGING_MAX:
        raise UnsupportedDegreeError(f"swinging_p supports n <= {SWINGING_MAX}, got {n}")
    xr = Fraction(x)
    total = sum(c * xr**j for j, c in enumerate(_swinging_coefficients(int(n))))
    return float(total)


def _check_even(value: int, name: str) -> int:
    if int(value) != value or value < 0 or value % 2:
        raise DomainError(f"{name} must be a nonnegative even integer, got {value}")
    return int(value)


def alpha(two_n: int, two_m: int) -> float:
    """Chaos coefficient alpha_{2n,2m} of the norm ||(zeta, eta)||."""
    n = _check_even(two_n, "two_n") // 2
    m = _check_even(two_m, "two_m") // 2
    if n + m > SWINGING_MAX:
        raise UnsupportedDegreeError(f"alpha requires n + m <= {SWINGING_MAX}")
    rational = Fraction(
        math.factorial(2 * n) * math.factorial(2 * m),
        math.factorial(n) * math.factorial(m) * 2 ** (n + m),
    )
    p = sum(c * Fraction(1, 4) ** j for j, c in enumerate(_swinging_coefficients(n + m)))
    return math.sqrt(math.pi / 2.0) * float(rational * p)


def beta(two_k: int) -> float:
    """Chaos coefficient beta_{2k} = H_{2k}(0)/sqrt(2 pi) of the Dirac delta at zero."""
    two_k = _check_even(two_k, "two_k")
    if two_k > BETA_MAX:
        raise UnsupportedDegreeError(f"beta supports 2k <= {BETA_MAX}")
    k = two_k // 2
    h_at_zero = (-1) ** k * math.prod(range(1, two_k, 2))
    return h_at_zero / math.sqrt(2.0 * math.pi)


# (coefficient, (order of f, order of d1 / sqrt(lam/2), order of d2 / sqrt(lam/2)))
# for the fourth-order chaos integrand, before the overall sqrt(lam/2) factor.
FOURTH_CHAOS_TERMS: tuple[tuple[float, tuple[int, int, int]], ...] = (
    (alpha(0, 0) * beta(4) / 24.0, (4, 0, 0)),
    (alpha(2, 0) * beta(2) / 4.0, (2, 2, 0)),
    (alpha(4, 0) * beta(0) / 24.0, (0, 4, 0)),
    (alpha(2, 2) * beta(0) / 4.0, (0, 2, 2)),
    (alpha(0, 2) * beta(2) / 4.0, (2, 0, 2)),
    (alpha(0, 4) * beta(0) / 24.0, (0, 0, 4)),
)


def _validate_corr(corr: np.ndarray, size: int) -> np.ndarray:
    corr = np.asarray(corr, dtype=float)
    if corr.shape != (size, size):
        raise DomainError(f"correlation matrix must be {size}x{size}, got {corr.shape}")
    if not np.allclose(corr, corr.T, atol=1e-12):
        raise DomainError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
        raise DomainError("correlation matrix must have unit diagonal")
    if size and np.linalg.eigvalsh(corr).min() < PSD_FLOOR:
        raise DomainError("correlation matrix is not positive semidefinite")
    return corr


def hermite_product_expectation(orders: Sequence[int], corr) -> float:
    """E[prod_i H_{q_i}(X_i)] for standardized jointly Gaussian X with correlation ``corr``.

    Sums over all complete pairings of the q_i legs of vertex i with legs
    of other vertices (no flat edges); each pairing contributes the product
    of the correlations along its edges.
    """
    orders = tuple(int(q) for q in orders)
    if any(q < 0 or q > DIAGRAM_MAX_ORDER for q in orders):
        raise UnsupportedDegreeError(f"each order must be in 0..{DIAGRAM_MAX_ORDER}")
    if sum(orders) > DIAGRAM_MAX_TOTAL:
        raise UnsupportedDegreeError(f"total order must be <= {DIAGRAM_MAX_TOTAL}")
    corr = _validate_corr(corr, len(orders))
    if sum(orders) % 2:
        return 0.0
    rho = corr.tolist()
    size = len(orders)

    @lru_cache(maxsize=None)
    def pairings(counts: tuple[int, ...]) -> float:
        i = next((k for k, c in enumerate(counts) if c), None)
        if i is None:
            return 1.0
        total = 0.0
        for j in range(size):
            if j == i or counts[j] == 0 or rho[i][j] == 0.0:
                continue
            rest = list(counts)
            rest[i] -= 1
            rest[j] -= 1
            total += counts[j] * rho[i][j] * pairings(tuple(rest))
        return total

    return pairings(orders)
