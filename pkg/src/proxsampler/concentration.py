"""Gaussian concentration bounds for semi-smooth functions and their Monte Carlo check.

For X ~ N(m, eta I) and a function l with l'(m) = 0 whose subgradient is
(alpha, L)-Hölder, the tail Pr(l(X) - E l(X) >= r) is bounded by

    (1 - eps/d)^{-d/2} exp(-C(alpha) eps^{alpha/(1+alpha)} r^{2/(1+alpha)}
                           / (L^{2/(1+alpha)} d^{alpha/(1+alpha)} eta)).

At alpha = 0 the bound is used in its eps -> 0 form, exp(-2 r^2 / (pi^2 L^2 eta)).
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import norm as _normal

from ._rng import TAG_TAIL, chunk_sizes, stream
from .potentials import Potential, SemiSmoothSpec, eval_potential, eval_subgradient
from .stepsize import composite_weights

VARIANTS = ("Standard", "Composite", "Errored", "LowRange")
DEFAULT_EPSILON = 0.5
MIN_SAMPLES = 10_000
TAIL_CHUNK = 1 << 16
WILSON_LEVEL = 0.999
DEFAULT_QUANTILES = (0.5, 0.9, 0.99, 0.999)


class GradientAtMeanError(ValueError):
    """The function's subgradient at the Gaussian mean is not zero."""


class OutOfRangeError(ValueError):
    """The threshold lies outside the range where the bound holds."""


def conc_constant(alpha: float) -> float:
    """C(a) = (1+a) (1/a)^{a/(1+a)} (1/pi^2)^{1/(1+a)} 2^{(1-a)/(1+a)}; 2/pi^2 at a = 0."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if alpha == 0.0:
        return 2.0 / math.pi**2
    e = 1.0 / (1.0 + alpha)
    return (1.0 + alpha) * (1.0 / alpha) ** (alpha * e) * (1.0 / math.pi**2) ** e * 2.0 ** ((1.0 - alpha) * e)


@dataclass(frozen=True)
class BoundQuery:
    variant: str
    specs: tuple[SemiSmoothSpec, ...]
    d: int
    eta: float
    epsilon: float = DEFAULT_EPSILON
    s_offset: float = 0.0
    weights: tuple[float, ...] | None = None
    # Multiplies the exponent; values above 1 give deliberately wrong bounds for control runs.
    rate_scale: float = 1.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        specs = (self.specs,) if isinstance(self.specs, SemiSmoothSpec) else tuple(self.specs)
        object.__setattr__(self, "specs", specs)
        if not specs:
            raise ValueError("at least one spec is required")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.variant != "LowRange" and not 0.0 < self.epsilon < self.d:
            raise ValueError(f"epsilon must lie in (0, d) = (0, {self.d}), got {self.epsilon}")
        if self.s_offset < 0:
            raise ValueError("s_offset must be non-negative")
        if self.weights is not None:
            w = tuple(float(v) for v in self.weights)
            object.__setattr__(self, "weights", w)
            if len(w) != len(specs):
                raise ValueError(f"{len(w)} weights for {len(specs)} components")
            if any(v <= 0 for v in w) or abs(math.fsum(w) - 1.0) > 1e-12:
                raise ValueError("weights must be positive and sum to 1")

    @property
    def spec(self) -> SemiSmoothSpec:
        if len(self.specs) != 1:
            raise ValueError("query has several component specs")
        return self.specs[0]


def _prefactor(epsilon: float, d: int) -> float:
    return (1.0 - epsilon / d) ** (-d / 2.0)


def _exponent(spec: SemiSmoothSpec, d: int, eta: float, epsilon: float, r: float) -> float:
    a, L = spec.alpha, spec.l_alpha
    e = 1.0 / (1.0 + a)
    return conc_constant(a) * epsilon ** (a * e) * r ** (2.0 * e) / (L ** (2.0 * e) * d ** (a * e) * eta)


def _check_r(r: float):
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")


def conc_bound(q: BoundQuery, r: float) -> float:
    """Standard single-component bound."""
    _check_r(r)
    sp = q.spec
    tail = math.exp(-q.rate_scale * _exponent(sp, q.d, q.eta, q.epsilon, r))
    return tail if sp.alpha == 0.0 else _prefactor(q.epsilon, q.d) * tail


def conc_bound_composite(q: BoundQuery, r: float) -> float:
    """Prefactor times sum_j exp(-C_j eps^{a_j/(1+a_j)} (w_j r)^{2/(1+a_j)} / (...))."""
    _check_r(r)
    w = q.weights if q.weights is not None else tuple(composite_weights(q.specs, q.d))
    if len(w) != len(q.specs):
        raise ValueError(f"{len(w)} weights for {len(q.specs)} components")
    terms = [math.exp(-q.rate_scale * _exponent(sp, q.d, q.eta, q.epsilon, wj * r)) for sp, wj in zip(q.specs, w)]
    total = math.fsum(terms)
    # The eps -> 0 form applies only when every component is Lipschitz; this keeps n = 1 identical to conc_bound.
    if all(sp.alpha == 0.0 for sp in q.specs):
        return total
    return _prefactor(q.epsilon, q.d) * total


def errored_multiplier(s: float, eta: float, d: int, epsilon: float) -> float:
    """exp(s^2 / (2 eta (d/eps - 1))): cost of centring the Gaussian s away from the stationary point."""
    if s < 0:
        raise ValueError("s must be non-negative")
    ratio = d / epsilon
    if ratio <= 1.0:
        raise ValueError("d / epsilon must exceed 1")
    return math.exp(s * s / (2.0 * eta * (ratio - 1.0)))


def conc_bound_errored(q: BoundQuery, r: float) -> float:
    base = conc_bound_composite(q, r) if len(q.specs) > 1 else conc_bound(q, r)
    return base * errored_multiplier(q.s_offset, q.eta, q.d, q.epsilon)


def lowrange_limit(spec: SemiSmoothSpec, d: int, eta: float) -> float:
    """Largest r for which the sub-Gaussian form holds (infinite at alpha = 0)."""
    a, L = spec.alpha, spec.l_alpha
    if a == 0.0:
        return math.inf
    return math.pi * L * d ** ((1 + a) / 2) * eta ** ((1 + a) / 2) / math.sqrt(a * 2.0**a)


def conc_bound_lowrange(spec: SemiSmoothSpec, d: int, eta: float, r: float) -> float:
    """exp(-r^2 / (pi^2 L^2 d^a eta^{1+a})) for 0 < r <= lowrange_limit."""
    _check_r(r)
    limit = lowrange_limit(spec, d, eta)
    if r > limit:
        raise OutOfRangeError(f"r = {r:g} exceeds the low-range limit {limit:g}")
    a, L = spec.alpha, spec.l_alpha
    return math.exp(-r * r / (math.pi**2 * L * L * d**a * eta ** (1 + a)))


def evaluate(q: BoundQuery, r: float) -> float:
    """Bound value for any variant; thresholds r <= 0 give the trivial bound 1."""
    if r <= 0:
        return 1.0
    if q.variant == "Standard":
        return conc_bound(q, r)
    if q.variant == "Composite":
        return conc_bound_composite(q, r)
    if q.variant == "Errored":
        return conc_bound_errored(q, r)
    return conc_bound_lowrange(q.spec, q.d, q.eta, r)


# ---------------------------------------------------------------------------
# Monte Carlo tails


def wilson_upper(k: np.ndarray, n: int, level: float = WILSON_LEVEL) -> np.ndarray:
    """One-sided Wilson score upper bound for a binomial proportion."""
    z = float(_normal.ppf(level))
    p = np.asarray(k, dtype=float) / n
    z2n = z * z / n
    centre = p + z2n / 2.0
    half = z * np.sqrt(p * (1.0 - p) / n + z2n / (4.0 * n))
    return np.minimum((centre + half) / (1.0 + z2n), 1.0)


@dataclass
class TailReport:
    r_grid: np.ndarray
    empirical: np.ndarray
    ci_upper: np.ndarray
    n_samples: int
    mean_estimate: float
    # Standard error of the plug-in mean and the gap between the two half-sample means.
    mean_se: float
    half_split_gap: float
    bound: np.ndarray | None = None
    dominated: np.ndarray | None = None
    variant: str | None = None
    extras: dict = field(default_factory=dict)

    @property
    def overall(self) -> bool:
        return bool(self.dominated is not None and np.all(self.dominated))


def _tail_chunk(args) -> np.ndarray:
    l, center, eta, seed, k, size = args
    rng = stream(seed, TAG_TAIL, k)
    x = center + math.sqrt(eta) * rng.standard_normal((size, center.size))
    return np.asarray(eval_potential(l, x), dtype=float)


def sample_values(l: Potential, center, eta: float, n_samples: int, seed: int, jobs: int = 1) -> np.ndarray:
    """l(X) for X ~ N(center, eta I), drawn in fixed chunks with per-chunk streams."""
    center = np.asarray(center, dtype=float)
    tasks = [(l, center, eta, seed, k, size) for k, size in enumerate(chunk_sizes(n_samples, TAIL_CHUNK))]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            parts = list(pool.map(_tail_chunk, tasks))
    else:
        parts = [_tail_chunk(t) for t in tasks]
    return np.concatenate(parts)


def _check_stationary(l: Potential, m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    g = float(np.linalg.norm(eval_subgradient(l, m)))
    if g > 1e-8:
        raise GradientAtMeanError(f"|l'(m)| = {g:g}; the bound needs a stationary centre")
    return m


def _tails_from_values(vals: np.ndarray, r_grid) -> TailReport:
    n = vals.size
    mean = float(np.mean(vals))
    half = n // 2
    gap = abs(float(np.mean(vals[:half])) - float(np.mean(vals[half:])))
    se = float(np.std(vals, ddof=1) / math.sqrt(n))
    dev = np.sort(vals - mean)
    r = np.asarray(r_grid, dtype=float)
    # Count of dev >= r via the sorted deviations.
    k = n - np.searchsorted(dev, r, side="left")
    return TailReport(r, k / n, wilson_upper(k, n), n, mean, se, gap)


def empirical_tail(l: Potential, m, eta: float, r_grid, n_samples: int, seed: int, jobs: int = 1,
                   offset=None) -> TailReport:
    """Tail frequencies of l(X) - mean(l(X)) for X ~ N(m + offset, eta I).

    The centring mean is the plug-in average of the same draws. ``offset``
    is only used for the errored variant (Gaussian centred away from m).
    """
    if n_samples < MIN_SAMPLES:
        raise ValueError(f"n_samples must be at least {MIN_SAMPLES}")
    if not eta > 0:
        raise ValueError("eta must be positive")
    m = _check_stationary(l, m)
    centre = m if offset is None else m + np.asarray(offset, dtype=float)
    vals = sample_values(l, centre, eta, n_samples, seed, jobs)
    return _tails_from_values(vals, r_grid)


def quantile_grid(l: Potential, m, eta: float, n_samples: int, seed: int,
                  quantiles: Sequence[float] = DEFAULT_QUANTILES, jobs: int = 1, offset=None) -> np.ndarray:
    """Empirical quantiles of l(X) - mean(l(X)) on the same draws verify_bound will use."""
    m = _check_stationary(l, m)
    centre = m if offset is None else m + np.asarray(offset, dtype=float)
    vals = sample_values(l, centre, eta, n_samples, seed, jobs)
    return np.quantile(vals - np.mean(vals), quantiles)


def verify_bound(query: BoundQuery, l: Potential, m, r_grid, n_samples: int, seed: int, jobs: int = 1,
                 quantiles: Sequence[float] = DEFAULT_QUANTILES) -> TailReport:
    """Compare empirical tails with the bound: a point passes when p_hat <= bound + Wilson half-width.

    ``r_grid=None`` uses the empirical ``quantiles`` of the centred values. Errored queries shift the Gaussian centre by
    ``s_offset`` along the first axis.
    """
    if query.d != l.dim:
        raise ValueError(f"query dimension {query.d} does not match l ({l.dim})")
    if query.eta <= 0:
        raise ValueError("eta must be positive")
    offset = None
    if query.variant == "Errored" and query.s_offset > 0:
        offset = np.zeros(l.dim)
        offset[0] = query.s_offset
    if n_samples < MIN_SAMPLES:
        raise ValueError(f"n_samples must be at least {MIN_SAMPLES}")
    m = _check_stationary(l, m)
    centre = m if offset is None else m + offset
    vals = sample_values(l, centre, query.eta, n_samples, seed, jobs)
    if r_grid is None:
        r_grid = np.quantile(vals - np.mean(vals), quantiles)
    report = _tails_from_values(vals, r_grid)
    report.bound = np.array([evaluate(query, float(r)) for r in report.r_grid])
    report.dominated = report.empirical <= report.bound + (report.ci_upper - report.empirical)
    report.variant = query.variant
    return report
