"""Closed-form stationary points of f(x) + |x - y|^2 / (2 eta) for the builtins.

Each function takes ``y`` with shape ``(..., d)`` and returns ``x_y`` of the
same shape. The certified subgradient at ``x_y`` is ``(y - x_y) / eta``.
"""
from __future__ import annotations

import numpy as np


class IllPosedProxError(ValueError):
    """The proximal subproblem has no unique stationary point."""


def _denominator(a: np.ndarray, eta: float) -> np.ndarray:
    denom = np.asarray(a, dtype=float) + 1.0 / eta
    if np.any(denom <= 0):
        raise IllPosedProxError(f"diag(A) + 1/eta must be positive, got min {denom.min():g}")
    return denom


def quadratic(y, eta, a, b):
    return (b + y / eta) / _denominator(a, eta)


def quadratic_l1(y, eta, a, lam):
    t = y / eta
    return np.sign(t) * np.maximum(np.abs(t) - lam, 0.0) / _denominator(a, eta)


def huber(y, eta, width):
    inner = y / (1.0 + eta / width)
    outer = y - eta * np.sign(y)
    return np.where(np.abs(y) <= width + eta, inner, outer)


def norm(y, eta, l0):
    r = np.linalg.norm(y, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(r > eta * l0, 1.0 - eta * l0 / r, 0.0)
    return y * scale


def linear(y, eta, b):
    return y - eta * np.broadcast_to(b, y.shape)


def zero(y, eta):
    return np.array(y, dtype=float, copy=True)
