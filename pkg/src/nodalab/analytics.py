"""Closed-form and asymptotic quantities for random spherical harmonics.

Two-point covariances at the pole/meridian configuration, the exact and
asymptotic cross-correlation between the fourth-chaos nodal integrand and
the trispectrum density, the resulting covariance and variance integrals,
two-point nodal correlation asymptotics, conditional gradient statistics and
level-z boundary-length chaos coefficients.

Throughout, x0 is the north pole and y(theta) = (theta, 0) lies on the zero
meridian; psi = L theta with L = l + 1/2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from math import factorial
from pathlib import Path
from typing import Sequence

import numpy as np

from .chaos import FOURTH_CHAOS_TERMS, hermite_product_expectation
from .errors import DomainError
from .specfun import DegreeParams, gauss_legendre, gaussian_pdf, legendre_triple

__all__ = [
    "TwoPointCovariance",
    "CrossCorrProfile",
    "two_point_cov",
    "cross_corr_exact",
    "cross_corr_terms",
    "cross_corr_diagram",
    "cross_corr_asymptotic",
    "cross_corr_profile",
    "cov_length_trispectrum",
    "var_trispectrum_exact",
    "var_proj4_exact",
    "kac_rice_two_point_asymptotic",
    "ConditionalGradient",
    "conditional_gradient_stats",
    "two_point_density",
    "boundary_length_chaos",
    "write_profile_csv",
    "write_variance_csv",
]

# Boundary between the small-psi regime and the oscillatory regime.
PSI_SPLIT = 10.0
# Nodes per unit psi in the panel quadrature of the covariance integral.
NODES_PER_PSI = 8


@dataclass(frozen=True)
class TwoPointCovariance:
    """Covariances between (f, d1, d2) at x0 and at y(theta).

    c01 is E[f(x0) d1 f(y)], c11 is E[d1 f(x0) d1 f(y)] and so on.
    """

    theta: float
    c00: float
    c01: float
    c02: float
    c11: float
    c12: float
    c22: float


@dataclass(frozen=True)
class CrossCorrProfile:
    ell: int
    psi: np.ndarray
    j_exact: np.ndarray
    j_asym: np.ndarray
    envelope: np.ndarray

    def __post_init__(self):
        n = self.psi.size
        if not all(a.shape == (n,) for a in (self.j_exact, self.j_asym, self.envelope)):
            raise DomainError("profile arrays must share one length")
        if n > 1 and np.any(np.diff(self.psi) <= 0):
            raise DomainError("psi must be strictly increasing")


def _check_theta(theta) -> np.ndarray:
    th = np.asarray(theta, dtype=float)
    if np.any(~((th > 0.0) & (th < math.pi))):
        raise DomainError("theta must lie in (0, pi)")
    return th


def two_point_cov(params: DegreeParams, theta: float) -> TwoPointCovariance:
    th = float(_check_theta(theta))
    x, s = math.cos(th), math.sin(th)
    t = legendre_triple(params, x)
    return TwoPointCovariance(
        theta=th,
        c00=t.p,
        c01=-t.dp * s,
        c02=0.0,
        c11=t.dp * x - t.ddp * s * s,
        c12=0.0,
        c22=t.dp,
    )


def _psi_to_theta(params: DegreeParams, psi) -> np.ndarray:
    psi_arr = np.asarray(psi, dtype=float)
    if np.any(~((psi_arr > 0.0) & (psi_arr < params.big_l * math.pi))):
        raise DomainError("psi must lie in (0, L pi)")
    return psi_arr / params.big_l


def cross_corr_terms(params: DegreeParams, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """E[A M], E[B M], E[C M] at cos(theta) = x: the only non-vanishing pieces of E[Psi4(x0) M(y)]."""
    if params.ell < 1:
        raise DomainError("cross-correlation needs ell >= 1")
    x = np.asarray(x, dtype=float)
    t = legendre_triple(params, x)
    p = np.asarray(t.p)
    ps2 = np.asarray(t.dp) ** 2 * (1.0 - x * x)  # (P' sin theta)^2
    half_lam = params.lam / 2.0
    eam = -half_lam / 64.0 * p**4
    ebm = p**2 * ps2 / 64.0
    ecm = ps2**2 / (256.0 * params.lam)
    return eam, ebm, ecm


def cross_corr_exact(params: DegreeParams, psi):
    """J(psi) = (8 pi^2 / L) (E[A M] + E[B M] + E[C M]) at theta = psi / L."""
    theta = _psi_to_theta(params, psi)
    eam, ebm, ecm = cross_corr_terms(params, np.cos(theta))
    out = 8.0 * math.pi**2 / params.big_l * (eam + ebm + ecm)
    return float(out) if np.ndim(psi) == 0 else out


def _pointwise_corr(params: DegreeParams, theta: float) -> np.ndarray:
    """Correlation matrix of (f, d1/s, d2/s) at x0 followed by the same at y(theta); s = sqrt(lam/2)."""
    c = two_point_cov(params, theta)
    var = params.lam / 2.0
    sd = math.sqrt(var)
    # E[d1 f(x0) f(y)] = -E[f(x0) d1 f(y)] by the reflection swapping x0 and y
    cross = np.array([
        [c.c00, c.c01 / sd, c.c02 / sd],
        [-c.c01 / sd, c.c11 / var, c.c12 / var],
        [c.c02 / sd, c.c12 / var, c.c22 / var],
    ])
    corr = np.eye(6)
    corr[:3, 3:] = cross
    corr[3:, :3] = cross.T
    return corr


def cross_corr_diagram(params: DegreeParams, psi: float) -> float:
    """J(psi) assembled term by term from the diagram formula.

    Every Hermite-product integrand of Psi4(x0) is paired with
    M(y) = -(1/96) sqrt(lam/2) H4(f(y)) and expectations come from
    hermite_product_expectation on the pointwise correlation matrix.
    """
    theta = float(_psi_to_theta(params, psi))
    corr = _pointwise_corr(params, theta)
    # vertices: f(x0), d1(x0), d2(x0), f(y)
    idx = [0, 1, 2, 3]
    sub = corr[np.ix_(idx, idx)]
    sigma = params.grad_scale
    total = 0.0
    for coef, (a, b, c) in FOURTH_CHAOS_TERMS:
        total += coef * hermite_product_expectation([a, b, c, 4], sub)
    total *= sigma * (-sigma / 96.0)
    return 8.0 * math.pi**2 / params.big_l * total


def cross_corr_asymptotic(params: DegreeParams, psi, form: str = "stated"):
    """Leading oscillatory terms of J and the remainder envelope.

    ``form="stated"`` uses the denominator psi sin(psi/L); ``form="sine"``
    uses L sin^2(psi/L), which the exact expression actually carries and
    which stays accurate up to psi = L pi / 2. The envelope is
    1/(psi^2 sin(psi/L)) + 1/(l psi sin(psi/L)) with unit constants.
    """
    psi_arr = np.asarray(psi, dtype=float)
    if np.any(psi_arr <= 0):
        raise DomainError("psi must be positive")
    if params.ell < 1:
        raise DomainError("cross-correlation needs ell >= 1")
    s = np.sin(psi_arr / params.big_l)
    if form == "stated":
        denom = psi_arr * s
    elif form == "sine":
        denom = params.big_l * s * s
    else:
        raise DomainError(f"unknown asymptotic form {form!r}")
    value = (1.0 / 64.0 + 5.0 / 64.0 * np.cos(4 * psi_arr) - 3.0 / 16.0 * np.sin(2 * psi_arr)) / denom
    envelope = 1.0 / (psi_arr**2 * s) + 1.0 / (params.ell * psi_arr * s)
    if np.ndim(psi) == 0:
        return float(value), float(envelope)
    return value, envelope


def cross_corr_profile(params: DegreeParams, psi_min: float, psi_max: float, steps: int,
                       form: str = "stated") -> CrossCorrProfile:
    if steps < 2:
        raise DomainError("steps must be at least 2")
    if not 0 < psi_min < psi_max:
        raise DomainError("need 0 < psi_min < psi_max")
    psi = np.linspace(psi_min, psi_max, int(steps))
    value, env = cross_corr_asymptotic(params, psi, form=form)
    return CrossCorrProfile(params.ell, psi, cross_corr_exact(params, psi), value, env)


def _panel_rule(edges: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = gauss_legendre(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (mid[:, None] + half[:, None] * nodes).ravel(), (half[:, None] * weights).ravel()


def cov_length_trispectrum(params: DegreeParams, method: str = "panels") -> float:
    """Cov(L, M) = integral over (0, L pi) of J(psi) sin(psi/L) dpsi.

    ``method="panels"``: Gauss-Legendre on unit-width psi panels with
    NODES_PER_PSI nodes each, refined fourfold on the head (0, PSI_SPLIT].
    ``method="legendre"``: the integrand is a polynomial of degree 4l in
    cos(theta), so 2l + 1 Gauss nodes in cos(theta) are exact.
    """
    if params.ell < 2:
        raise DomainError("cov_length_trispectrum requires ell >= 2")
    big_l = params.big_l
    if method == "legendre":
        x, w = gauss_legendre(2 * params.ell + 1)
        eam, ebm, ecm = cross_corr_terms(params, x)
        return float(8.0 * math.pi**2 * np.dot(w, eam + ebm + ecm))
    if method != "panels":
        raise DomainError(f"unknown method {method!r}")
    top = big_l * math.pi
    split = min(PSI_SPLIT, top)
    head = np.linspace(0.0, split, int(math.ceil(4 * split)) + 1)
    tail = np.linspace(split, top, int(math.ceil(top - split)) + 1)
    psi_h, w_h = _panel_rule(head, NODES_PER_PSI)
    psi_t, w_t = _panel_rule(tail, NODES_PER_PSI)
    psi = np.concatenate([psi_h, psi_t])
    w = np.concatenate([w_h, w_t])
    return float(np.dot(w, cross_corr_exact(params, psi) * np.sin(psi / big_l)))


def var_trispectrum_exact(params: DegreeParams) -> float:
    """Var(M) = (lam/2)(1/16)(1/576) 8 pi^2 4! integral of P^4 over [-1, 1]."""
    if params.ell < 1:
        raise DomainError("var_trispectrum_exact requires ell >= 1")
    x, w = gauss_legendre(2 * params.ell + 1)
    p = np.asarray(legendre_triple(params, x).p)
    return float(params.lam / 2.0 / (16.0 * 576.0) * 8.0 * math.pi**2 * 24.0 * np.dot(w, p**4))


def _paired_moments(a, b, d, e, r11, r12, r21, r22):
    """E[H_a(X1) H_b(X2) H_d(Y1) H_e(Y2)] with X1, X2 independent, Y1, Y2 independent.

    r_ij is the correlation of X_i with Y_j; all legs pair across the two points.
    """
    if a + b != d + e:
        return 0.0
    total = 0.0
    for k in range(a + 1):
        m12, m21 = a - k, d - k
        m22 = b - m21
        if m21 < 0 or m22 < 0 or m22 != e - m12:
            continue
        mult = factorial(a) * factorial(b) * factorial(d) * factorial(e) / (
            factorial(k) * factorial(m12) * factorial(m21) * factorial(m22))
        total = total + mult * r11**k * r12**m12 * r21**m21 * r22**m22
    return total


def var_proj4_exact(params: DegreeParams, nodes: int | None = None) -> float:
    """Var of the fourth-chaos projection, by the diagram formula under the integral.

    The d2 components only correlate with each other, so a term pair
    contributes only when their d2 orders agree, with weight c! r22^c.
    """
    if params.ell < 1:
        raise DomainError("var_proj4_exact requires ell >= 1")
    n = nodes if nodes is not None else 2 * params.ell + 6
    x, w = gauss_legendre(n)
    t = legendre_triple(params, x)
    s = np.sqrt(1.0 - x * x)
    var = params.lam / 2.0
    sd = math.sqrt(var)
    r11 = t.p
    r12 = -t.dp * s / sd
    r21 = t.dp * s / sd
    r22 = (t.dp * x - t.ddp * s * s) / var
    r33 = t.dp / var
    total = np.zeros_like(x)
    for c1, (a, b, c) in FOURTH_CHAOS_TERMS:
        for c2, (d, e, g) in FOURTH_CHAOS_TERMS:
            if c != g:
                continue
            total = total + c1 * c2 * factorial(c) * r33**c * _paired_moments(a, b, d, e, r11, r12, r21, r22)
    return float(var * 8.0 * math.pi**2 * np.dot(w, total))


def kac_rice_two_point_asymptotic(params: DegreeParams, psi):
    """K(psi) - 1/4 for the two-point correlation of the nodal length, leading terms."""
    psi_arr = np.asarray(psi, dtype=float)
    if np.any(psi_arr <= 0):
        raise DomainError("psi must be positive")
    ell = params.ell
    if ell < 1:
        raise DomainError("two-point asymptotics need ell >= 1")
    s = np.sin(psi_arr / params.big_l)
    pi2 = math.pi**2
    out = (
        0.5 * np.sin(2 * psi_arr) / (math.pi * ell * s)
        + (9.0 / 32.0) * np.cos(2 * psi_arr) / (math.pi * ell * psi_arr * s)
        + (1.0 / 256.0) / (pi2 * ell * psi_arr * s)
        + ((27.0 / 64.0) * np.sin(2 * psi_arr) - (75.0 / 256.0) * np.cos(4 * psi_arr)) / (pi2 * ell * psi_arr * s)
    )
    return float(out) if np.ndim(psi) == 0 else out


@dataclass(frozen=True)
class ConditionalGradient:
    """Conditional mean of (d1 f(x0), d2 f(x0), d1 f(y), d2 f(y)) given f(x0) = f(y) = u."""

    mean: np.ndarray
    a: np.ndarray  # covariance of (f(x0), f(y))
    b_t: np.ndarray  # 4 x 2 cross-covariances with (f(x0), f(y))


def conditional_gradient_stats(params: DegreeParams, theta: float, u: float) -> ConditionalGradient:
    th = float(_check_theta(theta))
    t = legendre_triple(params, math.cos(th))
    p = t.p
    if abs(p) >= 1.0:
        raise DomainError("values at the two points are perfectly correlated")
    ps = t.dp * math.sin(th)
    a = np.array([[1.0, p], [p, 1.0]])
    b_t = np.array([[-ps, 0.0], [0.0, 0.0], [0.0, ps], [0.0, 0.0]])
    mean = np.array([-u * ps, 0.0, u * ps, 0.0]) / (1.0 + p)
    return ConditionalGradient(mean, a, b_t)


def two_point_density(params: DegreeParams, theta: float, u):
    """Density of (f(x0), f(y)) at (u, u): unit variances, correlation P(cos theta)."""
    th = float(_check_theta(theta))
    p = legendre_triple(params, math.cos(th)).p
    if abs(p) >= 1.0:
        raise DomainError("degenerate correlation |P| = 1")
    u = np.asarray(u, dtype=float)
    out = np.exp(-u * u / (1.0 + p)) / (2.0 * math.pi * math.sqrt(1.0 - p * p))
    return float(out) if out.ndim == 0 else out


def boundary_length_chaos(params: DegreeParams, z: float) -> tuple[float, float]:
    """Mean length of {f = z} and the multiplier of the integral of H2(f) in its second chaos."""
    base = 2.0 * params.grad_scale * math.sqrt(math.pi / 8.0) * float(gaussian_pdf(z))
    return base * 4.0 * math.pi, base * z * z / 2.0


def write_profile_csv(profile: CrossCorrProfile, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["psi", "j_exact", "j_asym", "envelope"])
        for row in zip(profile.psi, profile.j_exact, profile.j_asym, profile.envelope):
            writer.writerow([repr(float(v)) for v in row])


def write_variance_csv(ells: Sequence[int], path: str | Path) -> None:
    """ell, var_M, cov_LM, var_proj4 for each degree."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ell", "var_M", "cov_LM", "var_proj4"])
        for ell in ells:
            p = DegreeParams(ell)
            writer.writerow([ell, repr(var_trispectrum_exact(p)), repr(cov_length_trispectrum(p)),
                             repr(var_proj4_exact(p))])
