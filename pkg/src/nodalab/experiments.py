"""Reproducible Monte Carlo campaigns and their statistics.

Every replicate is a pure function of (master_seed, ell, replicate), so the
report does not depend on how replicates are scheduled across workers.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .analytics import var_trispectrum_exact
from .errors import DomainError
from .field import sample_coefficients, synthesize
from .functionals import FunctionalSample, functional_sample
from .geometry import nodal_length_contour, nodal_length_epsilon
from .specfun import DegreeParams, gaussian_quantile, quadrature_grid

__all__ = [
    "ExperimentConfig",
    "DegreeSummary",
    "ExperimentReport",
    "grid_sizes",
    "run_replicate",
    "run_campaign",
    "empirical_wasserstein",
    "wasserstein_noise_floor",
    "fourth_cumulant",
    "jackknife_se",
    "l2_gap",
    "stein_bound",
    "write_report",
    "write_samples_csv",
]

CALIBRATION_SEED = 0x5EED_CA1B
CALIBRATION_REPS = 100
MIN_THETA = 64
MIN_PHI = 128
LENGTH_METHODS = ("contour", "epsilon_band")


def grid_sizes(ell: int, mult: float = 1.0, contour: bool = True) -> tuple[int, int]:
    """(n_theta, n_phi) for degree ``ell``.

    With ``contour`` the floor is the tracing resolution (5l, 10l); without,
    only the band-limit floor (2l+1, 4l+2) of the quartic functionals. Either
    is scaled by ``mult`` and kept above a small absolute minimum.
    """
    if mult < 1.0:
        raise DomainError(f"grid multiplier must be >= 1, got {mult}")
    base_theta, base_phi = (5 * ell, 10 * ell) if contour else (2 * ell + 1, 4 * ell + 2)
    n_theta = max(math.ceil(base_theta * mult), 2 * ell + 1, MIN_THETA)
    n_phi = max(math.ceil(base_phi * mult), 4 * ell + 2, MIN_PHI)
    return n_theta, n_phi


@dataclass(frozen=True)
class ExperimentConfig:
    ells: tuple[int, ...]
    replicates: int
    master_seed: int
    grid_mult: float = 1.0
    epsilon: float = 0.05
    length_method: str = "contour"
    measure_length: bool = True
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "ells", tuple(int(e) for e in self.ells))
        if not self.ells:
            raise DomainError("ells must be nonempty")
        if any(e < 1 for e in self.ells):
            raise DomainError("all ells must be >= 1")
        if int(self.replicates) != self.replicates or self.replicates < 2:
            raise DomainError("replicates must be an integer >= 2")
        if not 0 <= int(self.master_seed) < 2**64:
            raise DomainError("master_seed must be a 64-bit unsigned integer")
        if self.grid_mult < 1.0:
            raise DomainError("grid_mult must be >= 1 to keep the resolution floors")
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if self.length_method not in LENGTH_METHODS:
            raise DomainError(f"length_method must be one of {LENGTH_METHODS}")
        unknown = set(self.outputs) - {"report", "samples"}
        if unknown:
            raise DomainError(f"unknown output keys: {sorted(unknown)}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        missing = {"ells", "replicates", "master_seed"} - set(data)
        if missing:
            raise DomainError(f"missing config keys: {sorted(missing)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise DomainError("config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["ells"] = list(self.ells)
        return d


@dataclass(frozen=True)
class DegreeSummary:
    """Per-degree statistics; every ``*_se`` is a Monte Carlo standard error."""

    ell: int
    replicates: int
    n_theta: int
    n_phi: int
    mean_L: float
    mean_L_se: float
    mean_L_analytic: float
    var_L: float
    var_L_se: float
    var_M: float
    var_M_se: float
    var_M_analytic: float
    cov_LM: float
    cov_LM_se: float
    corr_LM: float
    corr_LM_se: float
    corr_proj4_M: float
    corr_proj4_M_se: float
    l2_gap: float
    l2_gap_se: float
    l2_gap_analytic_mean: float
    d_wasserstein: float
    d_wasserstein_floor: float
    cum4_M: float
    cum4_M_se: float
    cum4_h4: float
    cum4_h4_se: float
    stein_bound: float


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    rows: tuple[DegreeSummary, ...]
    samples: dict = field(repr=False, compare=False, default_factory=dict)
    version: str = __version__

    def row(self, ell: int) -> DegreeSummary:
        for r in self.rows:
            if r.ell == ell:
                return r
        raise KeyError(ell)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


# --- statistics --------------------------------------------------------------

def _as_sample(samples, minimum: int, what: str) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < minimum:
        raise DomainError(f"{what} needs at least {minimum} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{what} needs finite samples")
    if np.ptp(x) == 0.0:
        raise DomainError(f"{what} needs a sample with nonzero variance")
    return x


def _standardize(x: np.ndarray) -> np.ndarray:
    return (x - x.mean()) / x.std()


def empirical_wasserstein(samples) -> float:
    """W1 distance between the standardized sample and N(0, 1).

    Integral over t of |F_n^{-1}(t) - Phi^{-1}(t)| by the midpoint rule on
    the n subintervals [(i-1)/n, i/n], where F_n^{-1} is the i-th order statistic.
    """
    x = np.sort(_standardize(_as_sample(samples, 30, "empirical_wasserstein")))
    n = x.size
    t = (np.arange(n) + 0.5) / n
    return float(np.mean(np.abs(x - gaussian_quantile(t))))


def _gaussian_block(n: int, seed: int, index: int) -> np.ndarray:
    seq = np.random.SeedSequence([seed, n, index])
    bits = np.random.Generator(np.random.Philox(seq)).integers(0, 1 << 53, size=n, dtype=np.uint64)
    return gaussian_quantile((bits.astype(np.float64) + 0.5) * 2.0**-53)


def wasserstein_noise_floor(n: int, repetitions: int = CALIBRATION_REPS, seed: int = CALIBRATION_SEED) -> float:
    """Mean W1 self-distance of exact Gaussian samples of size n."""
    return float(np.mean([empirical_wasserstein(_gaussian_block(n, seed, k)) for k in range(repetitions)]))


def fourth_cumulant(samples) -> float:
    """Centered fourth cumulant m4 - 3 m2^2 with population moments."""
    x = _as_sample(samples, 100, "fourth_cumulant")
    c = x - x.mean()
    m2 = np.mean(c * c)
    return float(np.mean(c**4) - 3.0 * m2 * m2)


def jackknife_se(statistic: Callable[..., float], *columns: np.ndarray) -> float:
    """Leave-one-out jackknife standard error of statistic(*columns)."""
    cols = [np.asarray(c, dtype=float) for c in columns]
    n = cols[0].size
    if any(c.size != n for c in cols):
        raise DomainError("jackknife columns must have equal length")
    loo = np.array([statistic(*(np.concatenate([c[:i], c[i + 1:]]) for c in cols)) for i in range(n)])
    return float(math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


def _corr(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(_standardize(x) * _standardize(y)))


def l2_gap(l_samples, m_samples) -> float:
    """Mean squared difference of the standardized, replicate-matched pairs."""
    x = np.asarray(l_samples, dtype=float).ravel()
    y = np.asarray(m_samples, dtype=float).ravel()
    if x.size != y.size:
        raise DomainError(f"l2_gap needs matched samples, got {x.size} and {y.size}")
    x = _as_sample(x, 30, "l2_gap")
    y = _as_sample(y, 30, "l2_gap")
    gap = float(np.mean((_standardize(x) - _standardize(y)) ** 2))
    identity = 2.0 * (1.0 - _corr(x, y))
    if abs(gap - identity) > 1e-10:
        raise AssertionError(f"l2_gap {gap} departs from 2(1 - corr) = {identity}")
    return gap


def stein_bound(cum4_standardized: float, q: int = 4) -> float:
    """sqrt((2q - 2)/(3 pi q) * cum4) for a q-th chaos variable; negative cumulants give 0."""
    return math.sqrt(max(cum4_standardized, 0.0) * (2 * q - 2) / (3 * math.pi * q))


# --- campaign ----------------------------------------------------------------

def run_replicate(params: DegreeParams, config: ExperimentConfig, replicate: int) -> FunctionalSample:
    n_theta, n_phi = grid_sizes(params.ell, config.grid_mult, config.measure_length)
    grid = quadrature_grid(n_theta, n_phi)
    coeffs = sample_coefficients(params, config.master_seed, replicate)
    fg = synthesize(coeffs, grid, gradients=config.measure_length)
    if not config.measure_length:
        length = math.nan
    elif config.length_method == "contour":
        length = nodal_length_contour(fg).length
    else:
        length = nodal_length_epsilon(fg, config.epsilon).length
    return functional_sample(fg, length, config.master_seed, replicate)


def _nan_if_degenerate(fn: Callable[[], float]) -> float:
    try:
        return fn()
    except DomainError:
        return math.nan


def _summarize(params: DegreeParams, config: ExperimentConfig, samples: Sequence[FunctionalSample],
               floors: dict[int, float]) -> DegreeSummary:
    r = len(samples)
    n_theta, n_phi = grid_sizes(params.ell, config.grid_mult, config.measure_length)
    lengths = np.array([s.nodal_length for s in samples])
    h4 = np.array([s.h4 for s in samples])
    m = np.array([s.m for s in samples])
    p4 = np.array([s.proj4 for s in samples])
    have_l = config.measure_length

    def var(x):
        return float(np.var(x, ddof=1))

    def cov(x, y):
        return float(np.cov(x, y, ddof=1)[0, 1])

    def nan_unless(flag, fn):
        return _nan_if_degenerate(fn) if flag else math.nan

    mean_l_analytic = 2.0 * math.pi * params.grad_scale
    cum4_std = _nan_if_degenerate(lambda: fourth_cumulant(_standardize(m))) if r >= 100 else math.nan
    gap_analytic = math.nan
    if have_l:
        # centre with the analytic means E L = 2 pi sqrt(lam/2), E M = 0
        gap_analytic = float(np.mean(((lengths - mean_l_analytic) / lengths.std()
                                      - m / m.std()) ** 2))
    return DegreeSummary(
        ell=params.ell,
        replicates=r,
        n_theta=n_theta,
        n_phi=n_phi,
        mean_L=float(lengths.mean()),
        mean_L_se=float(lengths.std(ddof=1) / math.sqrt(r)),
        mean_L_analytic=mean_l_analytic,
        var_L=var(lengths),
        var_L_se=nan_unless(have_l, lambda: jackknife_se(var, lengths)),
        var_M=var(m),
        var_M_se=jackknife_se(var, m),
        var_M_analytic=var_trispectrum_exact(params),
        cov_LM=cov(lengths, m),
        cov_LM_se=nan_unless(have_l, lambda: jackknife_se(cov, lengths, m)),
        corr_LM=nan_unless(have_l, lambda: _corr(lengths, m)),
        corr_LM_se=nan_unless(have_l, lambda: jackknife_se(_corr, lengths, m)),
        corr_proj4_M=nan_unless(have_l, lambda: _corr(p4, m)),
        corr_proj4_M_se=nan_unless(have_l, lambda: jackknife_se(_corr, p4, m)),
        l2_gap=nan_unless(have_l, lambda: l2_gap(lengths, m)),
        l2_gap_se=nan_unless(have_l, lambda: jackknife_se(lambda a, b: 2.0 * (1.0 - _corr(a, b)), lengths, m)),
        l2_gap_analytic_mean=gap_analytic,
        d_wasserstein=_nan_if_degenerate(lambda: empirical_wasserstein(m)),
        d_wasserstein_floor=floors.get(r, math.nan),
        cum4_M=cum4_std,
        cum4_M_se=(_nan_if_degenerate(lambda: jackknife_se(lambda x: fourth_cumulant(_standardize(x)), m))
                   if r >= 101 else math.nan),
        cum4_h4=_nan_if_degenerate(lambda: fourth_cumulant(h4)) if r >= 100 else math.nan,
        cum4_h4_se=_nan_if_degenerate(lambda: jackknife_se(fourth_cumulant, h4)) if r >= 101 else math.nan,
        stein_bound=stein_bound(cum4_std) if math.isfinite(cum4_std) else math.nan,
    )


def run_campaign(config: ExperimentConfig, workers: int = 1,
                 progress: Optional[Callable[[int, int], None]] = None) -> ExperimentReport:
    """Run every (ell, replicate) pair and aggregate per degree.

    Replicates fan out to ``workers`` threads; results land in replicate
    order, so the report is identical for any worker count.
    """
    if workers < 1:
        raise DomainError("workers must be >= 1")
    floors = {}
    if config.replicates >= 30:
        floors[config.replicates] = wasserstein_noise_floor(config.replicates)
    rows = []
    all_samples: dict[int, tuple[FunctionalSample, ...]] = {}
    for ell in config.ells:
        params = DegreeParams(ell)
        reps = range(config.replicates)
        if workers == 1:
            samples = [run_replicate(params, config, k) for k in reps]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                samples = list(pool.map(lambda k: run_replicate(params, config, k), reps))
        all_samples[ell] = tuple(samples)
        rows.append(_summarize(params, config, samples, floors))
        if progress is not None:
            progress(ell, config.replicates)
    return ExperimentReport(config, tuple(rows), all_samples)


# --- output ------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_report(report: ExperimentReport, path: str | Path) -> Path:
    """CSV with one row per degree plus a ``<path>.meta.json`` provenance sidecar."""
    path = Path(path)
    names = [f.name for f in dataclasses.fields(DegreeSummary)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in report.rows:
            writer.writerow([_fmt(getattr(row, n)) for n in names])
    meta = {
        "config": report.config.to_dict(),
        "master_seed": report.config.master_seed,
        "version": report.version,
        "calibration_seed": CALIBRATION_SEED,
    }
    meta_path = path.with_name(path.name + ".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return meta_path


def write_samples_csv(report: ExperimentReport, path: str | Path) -> None:
    names = [f.name for f in dataclasses.fields(FunctionalSample)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for ell in report.config.ells:
            for s in report.samples[ell]:
                writer.writerow([_fmt(getattr(s, n)) for n in names])
