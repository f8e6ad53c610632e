"""Nodal-length estimation: isocontour tracing in (theta, phi) and the epsilon-band integral."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, ResolutionError
from .field import FieldGrid, eval_value
from .specfun import DegreeParams

__all__ = [
    "NodalEstimate",
    "check_contour_resolution",
    "nodal_length_contour",
    "nodal_length_epsilon",
    "yau_bounds_check",
    "write_segments_csv",
]

POINTS_PER_WAVELENGTH = 10
HERMITE_NEWTON_STEPS = 4
MAX_ARC_TURN = 0.5 * math.pi


@dataclass(frozen=True)
class NodalEstimate:
    length: float
    method: str
    resolution: tuple[int, int]
    epsilon: Optional[float] = None
    level: float = 0.0
    segments: Optional[np.ndarray] = dc_field(default=None, repr=False, compare=False)


def check_contour_resolution(ell: int, n_theta: int, n_phi: int) -> None:
    need_theta = POINTS_PER_WAVELENGTH * ell // 2
    need_phi = POINTS_PER_WAVELENGTH * ell
    if n_theta < need_theta or n_phi < need_phi:
        raise ResolutionError(
            f"contour tracing at degree {ell} needs n_theta >= {need_theta} and "
            f"n_phi >= {need_phi} (10 points per wavelength), got {n_theta} x {n_phi}; "
            "pass allow_coarse=True to override"
        )


def _segment_lengths(th1, ph1, th2, ph2) -> np.ndarray:
    # ds^2 = dtheta^2 + sin^2(theta_mid) dphi^2
    dth = th2 - th1
    dph = ph2 - ph1
    s = np.sin(0.5 * (th1 + th2))
    return np.sqrt(dth * dth + s * s * dph * dph)


def _arc_factor(th1, ph1, th2, ph2, a1, a2) -> np.ndarray:
    """Arc-to-chord ratio of the circle through both ends with the given normal directions.

    a1, a2 are the gradient angles in the local (theta, phi) orthonormal
    frames; the frame itself turns by cos(theta) dphi along the chord, which
    is added so that great circles get no correction. NaN angles give 1.
    """
    turn = a2 - a1 + np.cos(0.5 * (th1 + th2)) * (ph2 - ph1)
    turn = np.abs((turn + np.pi) % (2.0 * np.pi) - np.pi)
    half = 0.5 * np.minimum(np.nan_to_num(turn, nan=0.0), MAX_ARC_TURN)
    safe = np.where(half > 0, half, 1.0)
    return np.where(half > 0, safe / np.sin(safe), 1.0)


def _edge_fraction(v0, v1, s0=None, s1=None):
    """Fraction t in [0, 1] of the zero crossing between v0 and v1; NaN where no sign change.

    With endpoint derivatives s0, s1 (with respect to t) the crossing is the
    root of the cubic Hermite interpolant, found by Newton steps from the
    linear guess; otherwise the linear crossing is returned.
    """
    cross = (v0 > 0) != (v1 > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(cross, v0 / (v0 - v1), np.nan)
    if s0 is None:
        return t
    # p(t) = v0 + s0 t + c2 t^2 + c3 t^3 with p(1) = v1, p'(1) = s1
    c2 = 3.0 * (v1 - v0) - 2.0 * s0 - s1
    c3 = 2.0 * (v0 - v1) + s0 + s1
    lin = t
    for _ in range(HERMITE_NEWTON_STEPS):
        p = v0 + t * (s0 + t * (c2 + t * c3))
        dp = s0 + t * (2.0 * c2 + 3.0 * t * c3)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = t - p / dp
    # keep the linear crossing wherever the iteration left the edge
    return np.where(np.isfinite(t) & (t >= 0.0) & (t <= 1.0), t, lin)


def _edge_points(v0, v1, a0, a1):
    return a0 + _edge_fraction(v0, v1) * (a1 - a0)


def _cap_segments(pole_value: float, pole_theta: float, row: np.ndarray, row_theta: float,
                  phi_ext: np.ndarray, h_phi: np.ndarray):
    """Segments inside the fan of triangles joining a pole to the nearest latitude row."""
    n_phi = row.size
    # spoke k runs from the pole to (row_theta, phi_k)
    spoke_theta = _edge_points(np.full(n_phi, pole_value), row, pole_theta, row_theta)
    k = np.arange(n_phi)
    pts_theta = np.stack([spoke_theta[k], spoke_theta[(k + 1) % n_phi], np.full(n_phi, row_theta)], axis=1)
    pts_phi = np.stack([phi_ext[k], phi_ext[k + 1], h_phi], axis=1)
    valid = ~np.isnan(pts_theta) & ~np.isnan(pts_phi)
    has_two = valid.sum(axis=1) == 2
    order = np.argsort(~valid[has_two], axis=1, kind="stable")[:, :2]
    th = np.take_along_axis(pts_theta[has_two], order, axis=1)
    ph = np.take_along_axis(pts_phi[has_two], order, axis=1)
    return th[:, 0], ph[:, 0], th[:, 1], ph[:, 1]


def nodal_length_contour(field: FieldGrid, level: float = 0.0, allow_coarse: bool = False,
                         return_segments: bool = False, interpolation: str = "auto") -> NodalEstimate:
    """Length of {f = level} by marching squares on the (theta, phi) grid.

    With gradients ("auto" or "cubic") edge crossings are roots of the cubic
    Hermite interpolant and each chord is lengthened to the circular arc
    matching the gradient directions at its ends; "linear" (or a field
    without gradients) uses linear crossings and plain chords, whose
    length is biased upwards by O(h^2). Longitude wraps periodically, the
    polar caps are triangulated with the pole value, and saddle cells are
    split by the field value at the cell centre.
    """
    if interpolation not in ("auto", "cubic", "linear"):
        raise DomainError(f"interpolation must be auto, cubic or linear, got {interpolation!r}")
    if interpolation == "cubic":
        field.require_gradients()
    cubic = interpolation != "linear" and field.has_gradients
    grid = field.grid
    ell = field.params.ell
    if not allow_coarse:
        check_contour_resolution(ell, grid.n_theta, grid.n_phi)
    theta = grid.theta
    n_phi = grid.n_phi
    phi_ext = 2.0 * np.pi * np.arange(n_phi + 1) / n_phi
    g = field.f - level
    g_ext = np.concatenate([g, g[:, :1]], axis=1)

    # crossings on constant-theta edges (row i, phi_j -> phi_j+1) and constant-phi edges
    dphi = 2.0 * np.pi / n_phi
    dth = np.diff(theta)
    if cubic:
        d1 = np.concatenate([field.d1, field.d1[:, :1]], axis=1)
        d2 = np.concatenate([field.d2, field.d2[:, :1]], axis=1)
        # derivatives along the edges in units of the edge parameter
        s_ph = np.sin(theta)[:, None] * d2 * dphi
        t_h = _edge_fraction(g_ext[:, :-1], g_ext[:, 1:], s_ph[:, :-1], s_ph[:, 1:])
        t_v = _edge_fraction(g_ext[:-1, :], g_ext[1:, :], d1[:-1] * dth[:, None], d1[1:] * dth[:, None])
        # direction of the gradient in the local orthonormal frame at each crossing
        a_h = np.arctan2(d2[:, :-1] + t_h * (d2[:, 1:] - d2[:, :-1]), d1[:, :-1] + t_h * (d1[:, 1:] - d1[:, :-1]))
        a_v = np.arctan2(d2[:-1] + t_v * (d2[1:] - d2[:-1]), d1[:-1] + t_v * (d1[1:] - d1[:-1]))
    else:
        t_h = _edge_fraction(g_ext[:, :-1], g_ext[:, 1:])
        t_v = _edge_fraction(g_ext[:-1, :], g_ext[1:, :])
        a_h = np.full_like(t_h, np.nan)
        a_v = np.full_like(t_v, np.nan)
    h_phi = phi_ext[None, :-1] + t_h * dphi
    v_theta = theta[:-1, None] + t_v * dth[:, None]

    th_row = np.broadcast_to(theta[:, None], h_phi.shape)
    ph_col = np.broadcast_to(phi_ext[None, :], v_theta.shape)
    # edges of cell (i, j) in cyclic order: bottom, right, top, left
    e_th = np.stack([th_row[:-1], v_theta[:, 1:], th_row[1:], v_theta[:, :-1]], axis=-1)
    e_ph = np.stack([h_phi[:-1], ph_col[:, 1:], h_phi[1:], ph_col[:, :-1]], axis=-1)
    e_a = np.stack([a_h[:-1], a_v[:, 1:], a_h[1:], a_v[:, :-1]], axis=-1)
    valid = ~np.isnan(e_th) & ~np.isnan(e_ph)
    count = valid.sum(axis=-1)

    segs = []
    two = count == 2
    if np.any(two):
        vt, et, ep, ea = valid[two], e_th[two], e_ph[two], e_a[two]
        order = np.argsort(~vt, axis=1, kind="stable")[:, :2]
        th = np.take_along_axis(et, order, axis=1)
        ph = np.take_along_axis(ep, order, axis=1)
        an = np.take_along_axis(ea, order, axis=1)
        segs.append((th[:, 0], ph[:, 0], th[:, 1], ph[:, 1], an[:, 0], an[:, 1]))

    four = count == 4
    if np.any(four):
        ii, jj = np.nonzero(four)
        centre_theta = 0.5 * (theta[ii] + theta[ii + 1])
        centre_phi = 0.5 * (phi_ext[jj] + phi_ext[jj + 1])
        centre = np.atleast_1d(eval_value(field.coeffs, centre_theta, centre_phi)) - level
        corner = g_ext[ii, jj] > 0
        et, ep, ea = e_th[ii, jj], e_ph[ii, jj], e_a[ii, jj]
        # centre agrees with the (i, j) corner: cut off the two opposite-sign corners
        same = (centre > 0) == corner
        pair_a = np.where(same[:, None], [[0, 1]], [[0, 3]])
        pair_b = np.where(same[:, None], [[2, 3]], [[1, 2]])
        for pair in (pair_a, pair_b):
            th = np.take_along_axis(et, pair, axis=1)
            ph = np.take_along_axis(ep, pair, axis=1)
            an = np.take_along_axis(ea, pair, axis=1)
            segs.append((th[:, 0], ph[:, 0], th[:, 1], ph[:, 1], an[:, 0], an[:, 1]))

    north = eval_value(field.coeffs, 0.0, 0.0) - level
    south = eval_value(field.coeffs, math.pi, 0.0) - level
    for cap in (_cap_segments(north, 0.0, g[0], theta[0], phi_ext, h_phi[0]),
                _cap_segments(south, math.pi, g[-1], theta[-1], phi_ext, h_phi[-1])):
        nan = np.full_like(cap[0], np.nan)
        segs.append(cap + (nan, nan))

    th1, ph1, th2, ph2, a1, a2 = (np.concatenate([s[k] for s in segs]) for k in range(6))
    chords = _segment_lengths(th1, ph1, th2, ph2)
    if cubic:
        chords = chords * _arc_factor(th1, ph1, th2, ph2, a1, a2)
    length = float(np.sum(chords)) if th1.size else 0.0
    segments = np.stack([th1, ph1, th2, ph2], axis=1) if return_segments else None
    return NodalEstimate(length, "contour", (grid.n_theta, grid.n_phi), None, float(level), segments)


def _below_fraction(v0, v1, v2, c):
    """Area fraction of a triangle where a linear function with sorted vertex values v0 <= v1 <= v2 is below c."""
    with np.errstate(divide="ignore", invalid="ignore"):
        lower = (c - v0) ** 2 / ((v1 - v0) * (v2 - v0))
        upper = 1.0 - (v2 - c) ** 2 / ((v2 - v0) * (v2 - v1))
    return np.where(c <= v0, 0.0, np.where(c >= v2, 1.0, np.where(c <= v1, lower, upper)))


def _band_weight(values: np.ndarray, grads: np.ndarray, epsilon: float) -> np.ndarray:
    """Mean gradient norm times the area fraction where |f| <= eps, per triangle.

    ``values`` and ``grads`` have a trailing axis of length 3 (the vertices).
    """
    v = np.sort(values, axis=-1)
    v0, v1, v2 = v[..., 0], v[..., 1], v[..., 2]
    frac = _below_fraction(v0, v1, v2, epsilon) - _below_fraction(v0, v1, v2, -epsilon)
    return frac * grads.mean(axis=-1)


def nodal_length_epsilon(field: FieldGrid, epsilon: float, sampled: bool = False) -> NodalEstimate:
    """Integral of ||grad f|| (1/2 eps) 1{|f| <= eps} over the sphere.

    Each (theta, phi) cell, and each polar cap sector, is split into
    triangles on which f is interpolated linearly; the area of the band
    {|f| <= eps} is then exact for the interpolant and is weighted by the
    mean vertex gradient norm and sin(theta) at the centroid. This resolves
    bands far thinner than the grid spacing. ``sampled=True`` instead sums
    the integrand at the nodes with the quadrature weights, which is
    accurate only once the band spans several nodes.
    """
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    field.require_gradients()
    grid = field.grid
    grad = np.hypot(field.d1, field.d2)
    if sampled:
        integrand = np.where(np.abs(field.f) <= epsilon, grad, 0.0)
        return NodalEstimate(grid.integrate(integrand) / (2.0 * epsilon), "epsilon_band",
                             (grid.n_theta, grid.n_phi), float(epsilon))

    n_phi = grid.n_phi
    theta = grid.theta
    dphi = 2.0 * np.pi / n_phi
    f = field.f
    fr = np.roll(f, -1, axis=1)
    gr = np.roll(grad, -1, axis=1)
    a, b, c, d = f[:-1], fr[:-1], f[1:], fr[1:]
    ga, gb, gc, gd = grad[:-1], gr[:-1], grad[1:], gr[1:]
    dth = np.diff(theta)[:, None]
    # triangles (a, b, d) with centroid two thirds down and (a, c, d) one third down
    w_upper = _band_weight(np.stack([a, b, d], -1), np.stack([ga, gb, gd], -1), epsilon)
    w_lower = _band_weight(np.stack([a, c, d], -1), np.stack([ga, gc, gd], -1), epsilon)
    s_upper = np.sin(theta[:-1] + np.diff(theta) / 3.0)[:, None]
    s_lower = np.sin(theta[:-1] + 2.0 * np.diff(theta) / 3.0)[:, None]
    total = float(np.sum(0.5 * dth * dphi * (w_upper * s_upper + w_lower * s_lower)))

    # polar sectors: pole vertex with value from the series, gradient norm from the row
    for pole_theta, row in ((0.0, 0), (math.pi, -1)):
        pole = eval_value(field.coeffs, pole_theta, 0.0)
        vals = np.stack([np.full(n_phi, pole), f[row], fr[row]], -1)
        g_row = np.stack([0.5 * (grad[row] + gr[row]), grad[row], gr[row]], -1)
        h = abs(theta[row] - pole_theta)
        s_cap = math.sin(abs(pole_theta - 2.0 * h / 3.0))
        total += float(np.sum(0.5 * h * dphi * s_cap * _band_weight(vals, g_row, epsilon)))
    return NodalEstimate(total / (2.0 * epsilon), "epsilon_band", (grid.n_theta, n_phi), float(epsilon))


def yau_bounds_check(estimates: Sequence[NodalEstimate], params: DegreeParams) -> tuple[float, float]:
    """Smallest and largest length / sqrt(lambda) across the estimates."""
    if not estimates:
        raise DomainError("yau_bounds_check needs at least one estimate")
    if params.ell < 1:
        raise DomainError("yau_bounds_check needs ell >= 1")
    ratios = np.array([e.length for e in estimates]) / math.sqrt(params.lam)
    return float(ratios.min()), float(ratios.max())


def write_segments_csv(estimate: NodalEstimate, path: str | Path) -> None:
    if estimate.segments is None:
        raise DomainError("estimate carries no segments; trace with return_segments=True")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta1", "phi1", "theta2", "phi2"])
        for row in estimate.segments:
            writer.writerow([repr(float(v)) for v in row])
