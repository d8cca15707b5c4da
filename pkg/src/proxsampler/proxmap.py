"""Stationary points of f(x) + |x - y|^2 / (2 eta).

Every solver here accepts a single centre ``y`` of shape ``(d,)`` or a batch
of shape ``(m, d)``; in the batch case the per-row fields of
:class:`ProxResult` carry a leading axis of length ``m``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._closed_form import IllPosedProxError
from .potentials import Potential, SemiSmoothSpec, eval_potential, eval_subgradient

__all__ = [
    "IllPosedProxError",
    "ProxResult",
    "agd_constants",
    "default_max_iters",
    "default_s",
    "exact_tolerance",
    "prox_agd",
    "prox_closed_form",
    "prox_quadratic",
    "solve_prox",
]


@dataclass
class ProxResult:
    x_y: np.ndarray
    residual: np.ndarray | float
    iters: np.ndarray | int
    exact: bool
    # Subgradient of f at x_y used by the sampler's shift. Equal to
    # eval_subgradient(p, x_y) except at kinks, where it is (y - x_y) / eta.
    grad: np.ndarray
    s: float | None = None
    budget_exceeded: np.ndarray | bool = False


def _row_norm(v: np.ndarray) -> np.ndarray | float:
    n = np.linalg.norm(v, axis=-1)
    return float(n) if np.ndim(n) == 0 else n


def exact_tolerance(y, eta: float):
    """Residual ceiling for results reported as exact: 1e-10 * (1 + |y| / eta)."""
    return 1e-10 * (1.0 + _row_norm(np.asarray(y, dtype=float)) / eta)


def _check_eta(eta: float):
    if not (eta > 0 and math.isfinite(eta)):
        raise ValueError(f"eta must be positive and finite, got {eta}")


def prox_quadratic(A, b, y, eta: float) -> ProxResult:
    """Solve (A + I/eta) x = b + y/eta for diagonal A."""
    _check_eta(eta)
    a = np.asarray(A, dtype=float)
    if a.ndim == 2:
        if np.any(a != np.diag(np.diag(a))):
            raise ValueError("A must be diagonal")
        a = np.diag(a).copy()
    y = np.asarray(y, dtype=float)
    bb = np.asarray(b, dtype=float)
    if a.shape != (y.shape[-1],) or bb.shape != a.shape:
        raise ValueError("A, b and y must share the dimension")
    denom = a + 1.0 / eta
    if np.any(denom <= 0):
        raise IllPosedProxError(f"diag(A) + 1/eta must be positive, got min {denom.min():g}")
    x = (bb + y / eta) / denom
    grad = a * x - bb
    res = _row_norm(grad + (x - y) / eta)
    return ProxResult(x, res, np.zeros(res.shape, int) if np.ndim(res) else 0, True, grad)


def prox_closed_form(p: Potential, y, eta: float) -> ProxResult:
    """Exact stationary point from the potential's closed-form map.

    The residual is recomputed with ``eval_subgradient``. Where that fails
    the exactness ceiling the point sits on a kink (for example soft
    thresholding to 0), and the subgradient certified by the stationarity
    equation itself, (y - x_y) / eta, is used instead.
    """
    _check_eta(eta)
    if p.prox is None:
        raise ValueError(f"{p.name} has no closed-form proximal map")
    y = np.asarray(y, dtype=float)
    x = np.asarray(p.prox(y, eta), dtype=float)
    sub = eval_subgradient(p, x)
    res = np.linalg.norm(sub + (x - y) / eta, axis=-1)
    tol = np.asarray(exact_tolerance(y, eta))
    kink = res > tol
    grad = sub
    if np.any(kink):
        certified = (y - x) / eta
        grad = np.where(kink[..., None], certified, sub)
        res = np.where(kink, np.linalg.norm(grad + (x - y) / eta, axis=-1), res)
    res = float(res) if res.ndim == 0 else res
    iters = 0 if y.ndim == 1 else np.zeros(y.shape[0], int)
    return ProxResult(x, res, iters, True, grad)


def default_s(spec: SemiSmoothSpec, d: int) -> float:
    """Inexact-prox tolerance d^{1/(2(1+a))} / (7 L^{1/(1+a)})."""
    if d < 1:
        raise ValueError("d must be >= 1")
    a, L = spec.alpha, spec.l_alpha
    return d ** (1.0 / (2.0 * (1.0 + a))) / (7.0 * L ** (1.0 / (1.0 + a)))


def _regularity(spec: SemiSmoothSpec) -> float:
    a, L = spec.alpha, spec.l_alpha
    return L ** (2.0 / (1.0 + a)) / (1.0 + a) ** ((1.0 - a) / (1.0 + a))


def agd_constants(p: Potential, eta: float) -> tuple[float, float, float]:
    """Return (M, L_agd, beta_agd) for accelerated descent on f + |x - y|^2/(2 eta)."""
    M = sum(_regularity(sp) for sp in p.specs)
    return M, 1.0 / eta + M, max(1.0 / eta - M, 1.0 / (2.0 * eta))


def default_max_iters(p: Potential, eta: float, s: float) -> int:
    _, L, beta = agd_constants(p, eta)
    # log(1/s) is floored at 1 so loose tolerances (s >= 1/e) keep a usable budget.
    return 10 * math.ceil(math.sqrt(L / beta) * max(math.log(1.0 / s), 1.0))


def prox_agd(p: Potential, y, eta: float, s: float, max_iters: int | None = None) -> ProxResult:
    """Constant-step Nesterov descent started at y, stopped once |grad| <= s / eta.

    Rows that run out of budget are returned with ``budget_exceeded`` set;
    the caller decides what to do with them.
    """
    _check_eta(eta)
    if not s > 0:
        raise ValueError("s must be positive")
    y = np.asarray(y, dtype=float)
    if max_iters is None:
        max_iters = default_max_iters(p, eta, s)
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    _, L, beta = agd_constants(p, eta)
    q = math.sqrt(beta / L)
    momentum = (1.0 - q) / (1.0 + q)
    step = 1.0 / L
    target = s / eta

    single = y.ndim == 1
    Y = y[None, :] if single else y
    X = Y.copy()
    X_prev = Y.copy()
    iters = np.zeros(Y.shape[0], dtype=int)
    active = np.arange(Y.shape[0])
    for k in range(1, max_iters + 1):
        xa, xp, ya = X[active], X_prev[active], Y[active]
        z = xa + momentum * (xa - xp)
        x_new = z - step * (eval_subgradient(p, z) + (z - ya) / eta)
        g_new = eval_subgradient(p, x_new) + (x_new - ya) / eta
        if not np.all(np.isfinite(g_new)):
            raise FloatingPointError("non-finite gradient during accelerated prox iterations")
        X_prev[active] = xa
        X[active] = x_new
        iters[active] = k
        done = np.linalg.norm(g_new, axis=-1) <= target
        active = active[~done]
        if active.size == 0:
            break

    # Recompute the residual from scratch rather than trusting the loop.
    grad = eval_subgradient(p, X)
    res = np.linalg.norm(grad + (X - Y) / eta, axis=-1)
    energy = np.asarray(eval_potential(p, X))
    if not (np.all(np.isfinite(energy)) and np.all(np.isfinite(res))):
        raise FloatingPointError("non-finite energy at the accelerated prox output")
    over = res > target
    if single:
        return ProxResult(X[0], float(res[0]), int(iters[0]), False, grad[0], s, bool(over[0]))
    return ProxResult(X, res, iters, False, grad, s, over)


def solve_prox(p: Potential, y, eta: float, mode: str, s: float | None = None) -> ProxResult:
    """Dispatch: exact mode prefers the closed form, otherwise accelerated descent.

    Exact mode without a closed form requires ``s <= 1e-8`` (default 1e-8)
    and reports the result as exact only if it meets the exactness ceiling.
    """
    if mode == "exact":
        if p.prox is not None and s is None:
            return prox_closed_form(p, y, eta)
        s = 1e-8 if s is None else s
        if s > 1e-8:
            raise ValueError("exact mode with an iterative prox needs s <= 1e-8")
        out = prox_agd(p, y, eta, s)
        out.exact = bool(np.all(np.asarray(out.residual) <= np.asarray(exact_tolerance(y, eta))))
        return out
    if mode == "approx":
        if s is None:
            raise ValueError("approx mode needs a tolerance s")
        return prox_agd(p, y, eta, s)
    raise ValueError(f"mode must be 'exact' or 'approx', got {mode!r}")
