"""Rejection sampler for pi(x | y) proportional to exp(-f(x) - |x - y|^2 / (2 eta)).

Writing g(x) = f(x) - <f'(x_y), x>, the target is proportional to
exp(-g(x) - |x - c|^2 / (2 eta)) with c = x_y, up to a constant. Each trial
draws x and z independently from N(c, eta I), sets rho = exp(g(z) - g(x))
and accepts x when u <= rho / 2. With an inexact prox the proposal is
centred at w = y - eta f'(x_y) instead.

The engine works on a batch of independent centres at once. Each round
draws a small block of trials per unfinished row and keeps the first
acceptance in the block, which yields the same law as drawing trials one at
a time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .potentials import Potential, eval_potential
from .proxmap import ProxResult, solve_prox

MODES = ("exact", "approx")
DEFAULT_MAX_PROPOSALS = 1000
# exp overflows just above this; a larger log(rho) means eta is far too big.
LOG_RHO_CEILING = 709.0
_BLOCK = 4
_FIRST_BLOCK = 2


class RgoGiveUp(RuntimeError):
    """No acceptance within the proposal budget."""

    def __init__(self, proposals: int, row: int | None = None):
        where = "" if row is None else f" (row {row})"
        super().__init__(
            f"no proposal accepted after {proposals} trials{where}; eta is likely too large for the declared smoothness"
        )
        self.proposals = proposals
        self.row = row


class RgoNumericError(FloatingPointError):
    """rho overflowed or was not a number."""


class ProxBudgetError(RuntimeError):
    """The inexact prox did not reach its residual target within budget."""


@dataclass
class ShiftedPotential:
    base: Potential
    shift: np.ndarray
    center: np.ndarray

    def g(self, x) -> np.ndarray | float:
        """g(x) = f(x) - <shift, x>; ``x`` may carry extra leading axes."""
        x = np.asarray(x, dtype=float)
        f = eval_potential(self.base, x)
        return f - np.sum(self.shift * x, axis=-1)


@dataclass
class RgoOutcome:
    x: np.ndarray
    proposals: int
    prox: ProxResult
    rho_trace: list[float] | None = field(default=None)


@dataclass
class RgoBatch:
    x: np.ndarray  # (m, d)
    proposals: np.ndarray  # (m,)
    prox: ProxResult
    rho_trace: list[list[float]] | None = None


def _check_mode(mode: str):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def make_shifted(p: Potential, prox: ProxResult, y, eta: float, mode: str) -> ShiftedPotential:
    """Build g and the proposal centre from a prox result.

    The shift is the subgradient attached to ``prox``; this is
    eval_subgradient(p, x_y) away from kinks.
    """
    _check_mode(mode)
    shift = np.asarray(prox.grad, dtype=float)
    if mode == "exact":
        center = np.asarray(prox.x_y, dtype=float)
    else:
        center = np.asarray(y, dtype=float) - eta * shift
    return ShiftedPotential(p, shift, center)


def rejection_batch(
    p: Potential,
    shifted: ShiftedPotential,
    eta: float,
    rng: np.random.Generator,
    max_proposals: int = DEFAULT_MAX_PROPOSALS,
    record_rho: bool = False,
) -> tuple[np.ndarray, np.ndarray, list[list[float]] | None]:
    """Run the accept/reject loop for every row of ``shifted.center``."""
    if max_proposals < 1:
        raise ValueError("max_proposals must be >= 1")
    center = np.atleast_2d(shifted.center)
    shift = np.atleast_2d(shifted.shift)
    m, d = center.shape
    sd = math.sqrt(eta)
    out = np.empty((m, d))
    counts = np.zeros(m, dtype=np.int64)
    traces: list[list[float]] | None = [[] for _ in range(m)] if record_rho else None
    active = np.arange(m)
    full = True  # while every row is active, plain slicing replaces fancy indexing
    while active.size:
        used = int(counts[active[0]])  # all active rows have the same count
        if used >= max_proposals:
            raise RgoGiveUp(used, int(active[0]) if m > 1 else None)
        # Two trials cover most rows at acceptance rates near 1/2; stragglers get more.
        b = min(_FIRST_BLOCK if full else _BLOCK, max_proposals - used)
        a = active.size
        c_act = center if full else center[active]
        s_act = shift if full else shift[active]
        xz = c_act[:, None, None, :] + sd * rng.standard_normal((a, b, 2, d))
        u = rng.random((a, b))
        x = xz[:, :, 0]
        f = eval_potential(p, xz)
        lin = np.einsum("ad,abd->ab", s_act, xz[:, :, 1] - x)
        log_rho = (f[:, :, 1] - f[:, :, 0]) - lin
        if not np.all(log_rho <= LOG_RHO_CEILING):
            bad = float(np.nanmax(log_rho)) if not np.all(np.isnan(log_rho)) else float("nan")
            raise RgoNumericError(f"log rho = {bad:g} is not finite-representable; eta is too large")
        rho = np.exp(log_rho)
        accept = u <= 0.5 * rho
        hit = accept.any(axis=1)
        first = np.where(hit, accept.argmax(axis=1), b - 1)
        counts[active] += first + 1
        out[active[hit]] = x[hit, first[hit]]
        if traces is not None:
            for i, row in enumerate(active):
                traces[row].extend(rho[i, : first[i] + 1].tolist())
        active = active[~hit]
        full = False
    return out, counts, traces


def rgo_batch(
    p: Potential,
    y,
    eta: float,
    mode: str,
    s: float | None,
    rng: np.random.Generator,
    max_proposals: int = DEFAULT_MAX_PROPOSALS,
    record_rho: bool = False,
) -> RgoBatch:
    """One draw from pi(. | y_i) for every row y_i of ``y`` (shape (m, d)).

    Exact mode with ``s=None`` uses the potential's closed-form prox when it
    has one; passing ``s`` (at most 1e-8) forces accelerated descent.
    Approx mode needs ``s`` and centres proposals at y - eta f'(x_y).
    """
    _check_mode(mode)
    if not (eta > 0 and math.isfinite(eta)):
        raise ValueError("eta must be positive and finite")
    y = np.atleast_2d(np.asarray(y, dtype=float))
    prox = solve_prox(p, y, eta, mode, s)
    if np.any(prox.budget_exceeded):
        worst = float(np.max(prox.residual))
        raise ProxBudgetError(f"prox residual {worst:g} above target {prox.s / eta:g} after the iteration budget")
    shifted = make_shifted(p, prox, y, eta, mode)
    x, counts, traces = rejection_batch(p, shifted, eta, rng, max_proposals, record_rho)
    return RgoBatch(x, counts, prox, traces)


def rgo_sample(
    p: Potential,
    y,
    eta: float,
    mode: str,
    s: float | None,
    rng: np.random.Generator,
    max_proposals: int = DEFAULT_MAX_PROPOSALS,
    record_rho: bool = False,
) -> RgoOutcome:
    """Single draw; see :func:`rgo_batch`."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("rgo_sample takes a single centre; use rgo_batch for many")
    batch = rgo_batch(p, y[None, :], eta, mode, s, rng, max_proposals, record_rho)
    pr = batch.prox
    prox = ProxResult(
        pr.x_y[0], float(np.asarray(pr.residual).reshape(-1)[0]), int(np.asarray(pr.iters).reshape(-1)[0]),
        pr.exact, pr.grad[0], pr.s, bool(np.asarray(pr.budget_exceeded).reshape(-1)[0]),
    )
    trace = batch.rho_trace[0] if batch.rho_trace is not None else None
    return RgoOutcome(batch.x[0], int(batch.proposals[0]), prox, trace)


def conditional_gaussian(diag, b, y, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean and diagonal covariance of pi(x | y) for f = x^T A x / 2 - b^T x, A diagonal."""
    a = np.asarray(diag, dtype=float)
    prec = a + 1.0 / eta
    return (np.asarray(b, dtype=float) + np.asarray(y, dtype=float) / eta) / prec, 1.0 / prec
