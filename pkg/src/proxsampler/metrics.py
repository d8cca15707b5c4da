"""Empirical distances: W2 (1D exact, small-n assignment, sliced), 1D histogram TV, moment checks."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._rng import TAG_METRIC, stream

DEFAULT_N_CAP = 512
BOOTSTRAP_RESAMPLES = 200
_TAIL_CELLS = 4000
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


class NormalizationError(ValueError):
    """The supplied density does not integrate to 1."""


@dataclass
class DistanceEstimate:
    value: float
    method: str
    n_used: int
    bootstrap_ci: tuple[float, float] | None = None


def _as_2d(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] == 0:
        raise ValueError("samples must be a non-empty array of shape (n,) or (n, d)")
    return a


def _equalise(a: np.ndarray, b: np.ndarray, rng: np.random.Generator, cap: int | None = None):
    """Uniformly subsample both sets (without replacement) to a common size."""
    n = min(a.shape[0], b.shape[0])
    if cap is not None:
        n = min(n, cap)
    if a.shape[0] > n:
        a = a[np.sort(rng.choice(a.shape[0], n, replace=False))]
    if b.shape[0] > n:
        b = b[np.sort(rng.choice(b.shape[0], n, replace=False))]
    return a, b


def _bootstrap(stat: Callable[[np.ndarray, np.ndarray], float], a, b, value: float, rng: np.random.Generator,
               resamples: int) -> tuple[float, float]:
    """value +/- 1.96 bootstrap standard deviations, floored at 0."""
    reps = np.empty(resamples)
    for i in range(resamples):
        reps[i] = stat(a[rng.integers(0, a.shape[0], a.shape[0])], b[rng.integers(0, b.shape[0], b.shape[0])])
    half = 1.96 * float(np.std(reps, ddof=1))
    return max(0.0, value - half), value + half


def _w2_sorted(a: np.ndarray, b: np.ndarray) -> float:
    return math.sqrt(float(np.mean((np.sort(a.ravel()) - np.sort(b.ravel())) ** 2)))


def w2_empirical_1d(a, b, seed: int = 0, bootstrap: int = 0) -> DistanceEstimate:
    """Exact 1D W2 between empirical measures via the sorted coupling."""
    a, b = _as_2d(a), _as_2d(b)
    if a.shape[1] != 1 or b.shape[1] != 1:
        raise ValueError("w2_empirical_1d takes one-dimensional samples")
    rng = stream(seed, TAG_METRIC, 1)
    a, b = _equalise(a, b, rng)
    value = _w2_sorted(a, b)
    ci = _bootstrap(_w2_sorted, a, b, value, rng, bootstrap) if bootstrap else None
    return DistanceEstimate(value, "w2_1d_sorted", a.shape[0], ci)


def _w2_matching(a: np.ndarray, b: np.ndarray) -> float:
    cost = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=-1)
    rows, cols = linear_sum_assignment(cost)
    return math.sqrt(max(0.0, float(cost[rows, cols].sum()) / a.shape[0]))


def w2_empirical_assignment(a, b, n_cap: int = DEFAULT_N_CAP, seed: int = 0, bootstrap: int = 0) -> DistanceEstimate:
    """W2 from an exact minimum-cost perfect matching on squared distances (n <= n_cap)."""
    a, b = _as_2d(a), _as_2d(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError("sample dimensions differ")
    rng = stream(seed, TAG_METRIC, 2)
    a, b = _equalise(a, b, rng, n_cap)
    assert a.shape[0] <= n_cap and a.shape == b.shape
    value = _w2_matching(a, b)
    ci = _bootstrap(_w2_matching, a, b, value, rng, bootstrap) if bootstrap else None
    return DistanceEstimate(value, "w2_assignment", a.shape[0], ci)


def _unit_directions(rng: np.random.Generator, k: int, d: int) -> np.ndarray:
    u = rng.standard_normal((k, d))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def _sliced(a: np.ndarray, b: np.ndarray, dirs: np.ndarray) -> float:
    pa = np.sort(a @ dirs.T, axis=0)
    pb = np.sort(b @ dirs.T, axis=0)
    return math.sqrt(float(np.mean((pa - pb) ** 2)))


def sliced_w2(a, b, n_directions: int = 64, seed: int = 0, bootstrap: int = 0) -> DistanceEstimate:
    """sqrt of the direction-average of squared 1D W2 between projections."""
    if n_directions < 16:
        raise ValueError("n_directions must be >= 16")
    a, b = _as_2d(a), _as_2d(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError("sample dimensions differ")
    rng = stream(seed, TAG_METRIC, 3)
    a, b = _equalise(a, b, rng)
    dirs = _unit_directions(rng, n_directions, a.shape[1])
    value = _sliced(a, b, dirs)
    ci = None
    if bootstrap:
        ci = _bootstrap(lambda x, y: _sliced(x, y, dirs), a, b, value, rng, bootstrap)
    return DistanceEstimate(value, "sliced_w2", a.shape[0], ci)


def _bin_masses(density: Callable[[np.ndarray], np.ndarray], edges: np.ndarray) -> np.ndarray:
    """16-point Gauss-Legendre rule on every bin."""
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    pts = lo + half * (_GL_NODES[None, :] + 1.0)
    vals = np.asarray(density(pts.ravel()), dtype=float).reshape(pts.shape)
    return (vals * _GL_WEIGHTS[None, :]).sum(axis=1) * half[:, 0]


def _outside_mass(density: Callable[[np.ndarray], np.ndarray], lo: float, hi: float) -> float:
    """Density mass outside [lo, hi] on log-spaced cells reaching 1e6 support widths out."""
    w = hi - lo
    offsets = np.concatenate([[0.0], np.geomspace(1e-3 * w, 1e6 * w, _TAIL_CELLS)])
    right = _bin_masses(density, hi + offsets).sum()
    left = _bin_masses(density, lo - offsets[::-1]).sum()
    return float(right + left)


def tv_histogram_1d(samples, density: Callable[[np.ndarray], np.ndarray], bins: int = 64,
                    support: tuple[float, float] | None = None, proposal_sd: float | None = None) -> DistanceEstimate:
    """Half the L1 gap between histogram masses and the density's bin masses.

    Mass outside ``support`` (density and samples alike) enters the L1 sum
    as a single extra cell. The default support is the sample range widened
    by three ``proposal_sd`` (sample standard deviation if not given).
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("no samples")
    if bins < 16:
        raise ValueError("bins must be >= 16")
    if support is None:
        sd = float(np.std(x)) if proposal_sd is None else float(proposal_sd)
        support = (float(x.min()) - 3.0 * sd, float(x.max()) + 3.0 * sd)
    lo, hi = support
    if not hi > lo:
        raise ValueError("support must be a non-empty interval")
    edges = np.linspace(lo, hi, bins + 1)
    dens = _bin_masses(density, edges)

    dens_out = _outside_mass(density, lo, hi)
    total = float(dens.sum()) + dens_out
    if abs(total - 1.0) > 0.01:
        raise NormalizationError(f"density integrates to {total:.6g}, not 1")
    counts, _ = np.histogram(x, edges)
    emp = counts / x.size
    emp_out = 1.0 - emp.sum()
    value = 0.5 * (float(np.abs(emp - dens).sum()) + abs(emp_out - dens_out))
    return DistanceEstimate(value, "tv_histogram_1d", x.size)


def gaussian_density(mean: float, var: float) -> Callable[[np.ndarray], np.ndarray]:
    def pdf(t):
        t = np.asarray(t, dtype=float)
        return np.exp(-0.5 * (t - mean) ** 2 / var) / math.sqrt(2.0 * math.pi * var)

    return pdf


def grid_density(log_density: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                 n_grid: int = 200_001) -> Callable[[np.ndarray], np.ndarray]:
    """Normalise exp(log_density) numerically on [lo, hi] (zero outside)."""
    grid = np.linspace(lo, hi, n_grid)
    lg = np.asarray(log_density(grid), dtype=float)
    shift = float(lg.max())
    w = np.exp(lg - shift)
    z = float(np.sum(0.5 * (w[1:] + w[:-1]) * np.diff(grid)))
    log_z = shift + math.log(z)

    def pdf(t):
        t = np.asarray(t, dtype=float)
        inside = (t >= lo) & (t <= hi)
        return np.where(inside, np.exp(np.asarray(log_density(t), dtype=float) - log_z), 0.0)

    return pdf


@dataclass
class MomentCheck:
    mean: np.ndarray
    var: np.ndarray
    mean_z: np.ndarray
    var_z: np.ndarray

    def ok(self, n_se: float = 4.0) -> bool:
        return bool(np.all(np.abs(self.mean_z) <= n_se) and np.all(np.abs(self.var_z) <= n_se))


def moment_check(samples, mean, var) -> MomentCheck:
    """Per-coordinate z-scores of the sample mean and variance against targets.

    The variance standard error uses the sample fourth central moment.
    """
    x = _as_2d(samples)
    n = x.shape[0]
    m = x.mean(axis=0)
    c = x - m
    v = (c * c).sum(axis=0) / (n - 1)
    m4 = (c**4).mean(axis=0)
    se_m = np.sqrt(np.asarray(var, dtype=float) / n)
    se_v = np.sqrt(np.maximum(m4 - v * v, 0.0) / n)
    return MomentCheck(m, v, (m - np.asarray(mean)) / se_m, (v - np.asarray(var)) / se_v)
