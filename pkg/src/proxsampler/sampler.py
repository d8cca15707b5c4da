"""Proximal sampler chains, ULA/MALA baselines and exact reference draws.

A proximal step adds N(0, eta I) noise to the current state and then draws
the next state from pi(x | y) with the rejection oracle. Chains are run in
fixed blocks of ``CHAIN_BLOCK``; block ``k`` always draws from
``stream(seed, TAG_SAMPLER, k)``, so the output does not depend on how many
worker processes share the blocks.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import norm as _normal
from scipy.stats import qmc

from ._rng import TAG_BASELINE, TAG_SAMPLER, TAG_TRUTH, stream
from .potentials import Potential, coordinate_energy, eval_potential, eval_subgradient, gaussian_moments
from .rgo import DEFAULT_MAX_PROPOSALS, RgoGiveUp, rgo_batch
from .stepsize import Plan

CHAIN_BLOCK = 1024


class SamplerError(RuntimeError):
    """An oracle call failed inside a chain; carries the step index."""

    def __init__(self, step: int, cause: Exception):
        super().__init__(f"step {step}: {cause}")
        self.step = step
        self.cause = cause


@dataclass
class Trace:
    """Recorded run of one or more chains.

    ``samples[k]`` holds every chain's state at step ``steps[k]``
    (shape ``(n_chains, d)``). ``proposals[t]`` is the total number of oracle
    trials over all chains at step ``t + 1`` and ``prox_iters[t]`` the largest
    inner-solver iteration count at that step.
    """

    steps: np.ndarray
    samples: np.ndarray
    proposals: np.ndarray
    prox_iters: np.ndarray
    plan: Plan | None
    root_seed: int
    n_chains: int
    final: np.ndarray
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)
    # Largest prox residual divided by its target s / eta (inexact mode only).
    max_residual_ratio: float = 0.0
    y_snapshots: np.ndarray | None = None
    # Sum over chains of inner-solver iterations at each step.
    prox_iters_total: np.ndarray | None = None

    @property
    def t_steps(self) -> int:
        return int(self.proposals.shape[0])

    @property
    def mean_proposals(self) -> float:
        if self.t_steps == 0:
            return 0.0
        return float(self.proposals.sum()) / (self.t_steps * self.n_chains)

    def evaluations_per_chain(self) -> float:
        """Average oracle evaluations per chain over the run.

        Each trial costs two energy evaluations; each prox costs one
        subgradient evaluation plus two per inner iteration.
        """
        if self.t_steps == 0:
            return 0.0
        iters = 0 if self.prox_iters_total is None else int(self.prox_iters_total.sum())
        total = 2 * int(self.proposals.sum()) + 2 * iters + self.t_steps * self.n_chains
        return total / self.n_chains

    def per_step(self) -> list[tuple[float, int]]:
        """(mean proposals per chain, max prox iterations) for each step."""
        return [(float(p) / self.n_chains, int(i)) for p, i in zip(self.proposals, self.prox_iters)]


def default_stride(t_steps: int) -> int:
    return max(1, t_steps // 1000)


def _starts(x0, n: int, d: int) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if x0.shape == (d,):
        return np.tile(x0, (n, 1))
    if x0.shape == (n, d):
        return x0.copy()
    raise ValueError(f"x0 must have shape ({d},) or ({n}, {d}), got {x0.shape}")


@dataclass
class _BlockResult:
    recorded: list[np.ndarray]
    proposals: np.ndarray
    prox_iters: np.ndarray
    prox_iters_total: np.ndarray
    final: np.ndarray
    snapshots: dict[int, np.ndarray]
    max_ratio: float
    ys: list[np.ndarray]


def _run_block(p: Potential, plan: Plan, x0: np.ndarray, seed: int, block: int, record: tuple[int, ...],
               snapshot_steps: tuple[int, ...], record_y: bool, max_proposals: int) -> _BlockResult:
    rng = stream(seed, TAG_SAMPLER, block)
    x = x0.copy()
    T, eta = plan.t_steps, plan.eta
    sd = math.sqrt(eta)
    rec = set(record)
    snaps = set(snapshot_steps)
    recorded = [x.copy()] if 0 in rec else []
    snapshots = {0: x.copy()} if 0 in snaps else {}
    ys: list[np.ndarray] = []
    proposals = np.zeros(T, dtype=np.int64)
    iters = np.zeros(T, dtype=np.int64)
    iters_total = np.zeros(T, dtype=np.int64)
    # Exact mode with s set forces the iterative prox at that tolerance.
    s = plan.s
    target = s / eta if s is not None else None
    max_ratio = 0.0
    for t in range(1, T + 1):
        y = x + sd * rng.standard_normal(x.shape)
        try:
            out = rgo_batch(p, y, eta, plan.mode, s, rng, max_proposals)
        except (RgoGiveUp, FloatingPointError, RuntimeError) as exc:
            raise SamplerError(t, exc) from exc
        x = out.x
        proposals[t - 1] = int(out.proposals.sum())
        iters[t - 1] = int(np.max(out.prox.iters))
        iters_total[t - 1] = int(np.sum(out.prox.iters))
        if target is not None:
            max_ratio = max(max_ratio, float(np.max(out.prox.residual)) / target)
        if t in rec:
            recorded.append(x.copy())
            if record_y:
                ys.append(y.copy())
        if t in snaps:
            snapshots[t] = x.copy()
    return _BlockResult(recorded, proposals, iters, iters_total, x, snapshots, max_ratio, ys)


def _block_task(args):
    return _run_block(*args)


def run_proximal_sampler(
    p: Potential,
    plan: Plan,
    x0,
    seed: int,
    record_stride: int | None = None,
    n_chains: int = 1,
    jobs: int = 1,
    snapshot_steps: Sequence[int] = (),
    record_y: bool = False,
    max_proposals: int = DEFAULT_MAX_PROPOSALS,
    chain_block: int = CHAIN_BLOCK,
) -> Trace:
    """Run ``n_chains`` independent proximal-sampler chains for ``plan.t_steps`` steps.

    Steps that are multiples of ``record_stride`` (plus step 0) are stored
    in ``samples``; ``snapshot_steps`` are stored separately in full.
    Results depend on ``chain_block`` (it fixes the stream layout) but not
    on ``jobs``.
    """
    if n_chains < 1:
        raise ValueError("n_chains must be >= 1")
    if chain_block < 1:
        raise ValueError("chain_block must be >= 1")
    T = int(plan.t_steps)
    if T < 0:
        raise ValueError("t_steps must be non-negative")
    stride = default_stride(T) if record_stride is None else int(record_stride)
    if stride < 1:
        raise ValueError("record_stride must be >= 1")
    bad = [t for t in snapshot_steps if not 0 <= t <= T]
    if bad:
        raise ValueError(f"snapshot steps outside [0, {T}]: {bad}")
    starts = _starts(x0, n_chains, p.dim)
    record = tuple(range(0, T + 1, stride))
    snaps = tuple(sorted(set(int(t) for t in snapshot_steps)))
    tasks = [
        (p, plan, starts[lo: lo + chain_block], seed, k, record, snaps, record_y, max_proposals)
        for k, lo in enumerate(range(0, n_chains, chain_block))
    ]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_block_task, tasks))
    else:
        results = [_block_task(t) for t in tasks]

    samples = np.stack([np.concatenate([r.recorded[k] for r in results]) for k in range(len(record))])
    ys = None
    if record_y:
        ys = np.stack([np.concatenate([r.ys[k] for r in results]) for k in range(len(record) - 1)]) if T else None
    return Trace(
        steps=np.array(record, dtype=np.int64),
        samples=samples,
        proposals=np.sum([r.proposals for r in results], axis=0).astype(np.int64),
        prox_iters=np.max([r.prox_iters for r in results], axis=0).astype(np.int64),
        plan=plan,
        root_seed=seed,
        n_chains=n_chains,
        final=np.concatenate([r.final for r in results]),
        snapshots={t: np.concatenate([r.snapshots[t] for r in results]) for t in snaps},
        max_residual_ratio=max(r.max_ratio for r in results),
        y_snapshots=ys,
        prox_iters_total=np.sum([r.prox_iters_total for r in results], axis=0).astype(np.int64),
    )


def gaussian_variance_recursion(v0: float, eta: float, t_steps: int) -> np.ndarray:
    """Exact per-step variance of the ideal chain on N(0, 1) in one dimension."""
    v = np.empty(t_steps + 1)
    v[0] = v0
    for t in range(t_steps):
        v[t + 1] = eta / (1 + eta) + (v[t] + eta) / (1 + eta) ** 2
    return v


# ---------------------------------------------------------------------------
# baselines


@dataclass
class BaselineTrace:
    method: str
    eta: float
    steps: np.ndarray
    samples: np.ndarray
    final: np.ndarray
    accept_rate: float
    n_chains: int
    root_seed: int
    evals_per_step: int


def _mala_log_q(x_to, x_from, grad_from, eta):
    diff = x_to - x_from + eta * grad_from
    return -np.sum(diff * diff, axis=-1) / (4.0 * eta)


def run_baseline(method: str, p: Potential, eta: float, t_steps: int, x0, seed: int,
                 n_chains: int = 1, record_stride: int | None = None) -> BaselineTrace:
    """ULA: x' = x - eta grad f(x) + sqrt(2 eta) xi.  MALA adds a Metropolis correction."""
    if method not in ("ULA", "MALA"):
        raise ValueError(f"method must be 'ULA' or 'MALA', got {method!r}")
    if not eta > 0:
        raise ValueError("eta must be positive")
    if method == "MALA" and any(sp.alpha != 1.0 for sp in p.specs):
        raise ValueError("MALA needs every component to be smooth (alpha = 1)")
    rng = stream(seed, TAG_BASELINE)
    stride = default_stride(t_steps) if record_stride is None else int(record_stride)
    x = _starts(x0, n_chains, p.dim)
    scale = math.sqrt(2.0 * eta)
    rec_steps = list(range(0, t_steps + 1, stride))
    rec = set(rec_steps)
    recorded = [x.copy()]
    accepted = 0
    g = eval_subgradient(p, x)
    fx = np.asarray(eval_potential(p, x)) if method == "MALA" else None
    with np.errstate(over="raise", invalid="raise"):
        for t in range(1, t_steps + 1):
            prop = x - eta * g + scale * rng.standard_normal(x.shape)
            if method == "ULA":
                x = prop
                g = eval_subgradient(p, x)
            else:
                gp = eval_subgradient(p, prop)
                fp = np.asarray(eval_potential(p, prop))
                log_a = (fx - fp) + _mala_log_q(x, prop, gp, eta) - _mala_log_q(prop, x, g, eta)
                acc = np.log(rng.random(n_chains)) < log_a
                accepted += int(acc.sum())
                x = np.where(acc[:, None], prop, x)
                g = np.where(acc[:, None], gp, g)
                fx = np.where(acc, fp, fx)
            if t in rec:
                recorded.append(x.copy())
    rate = 1.0 if method == "ULA" else accepted / max(1, t_steps * n_chains)
    return BaselineTrace(method, eta, np.array(rec_steps), np.stack(recorded), x, rate, n_chains, seed,
                         1 if method == "ULA" else 2)


# ---------------------------------------------------------------------------
# exact reference draws


def _grid_inverse_cdf(energy, rng: np.random.Generator, size: int, n_grid: int = 200001) -> np.ndarray:
    """Draw from exp(-energy(t)) on the line by inverting a fine-grid CDF."""
    half = 1.0
    while energy(np.array([half]))[0] - energy(np.array([0.0]))[0] < 60.0 or \
            energy(np.array([-half]))[0] - energy(np.array([0.0]))[0] < 60.0:
        half *= 2.0
    grid = np.linspace(-half, half, n_grid)
    e = energy(grid)
    dens = np.exp(-(e - e.min()))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    return np.interp(rng.random(size), cdf, grid)


def reference_samples(p: Potential, n: int, seed: int, quasi: bool = False) -> np.ndarray:
    """Exact (or fine-grid exact) draws from exp(-f) for the normalisable builtins.

    ``quasi=True`` (Gaussian targets only) maps a scrambled Sobol point set
    through the normal quantile function instead of drawing iid points, so
    the reference set itself adds little sampling noise to distance estimates.
    """
    rng = stream(seed, TAG_TRUTH)
    d = p.dim
    moments = gaussian_moments(p)
    if quasi and moments is None:
        raise ValueError("quasi-random reference sets are only available for Gaussian targets")
    if moments is not None:
        mean, var = moments
        if quasi:
            u = qmc.Sobol(d, scramble=True, seed=rng).random(n)
            return mean + np.sqrt(var) * _normal.ppf(u)
        return mean + np.sqrt(var) * rng.standard_normal((n, d))
    if p.name == "l1":
        return rng.laplace(0.0, 1.0 / p.params["lam"], size=(n, d))
    if p.name == "norm":
        r = rng.gamma(d, 1.0 / p.params["l0"], size=(n, 1))
        u = rng.standard_normal((n, d))
        return r * u / np.linalg.norm(u, axis=1, keepdims=True)
    if p.name == "gaussian_mixture":
        mu = np.asarray(p.params["mean"])
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        return sign[:, None] * mu + rng.standard_normal((n, d))
    if p.name in ("huber", "composite_quad_l1"):
        if p.name == "composite_quad_l1" and min(p.params["diag"]) < 0:
            raise ValueError("composite target with a negative curvature entry is not normalisable")
        cols = [_grid_inverse_cdf(coordinate_energy(p, i), rng, n) for i in range(d)]
        return np.stack(cols, axis=1)
    raise ValueError(f"no reference sampler for target {p.name!r}")
