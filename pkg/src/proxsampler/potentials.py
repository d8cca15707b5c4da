"""Potentials f = sum_j f_j with declared semi-smoothness, plus builtin targets.

All energy and subgradient callables are vectorised over leading axes: an
energy maps ``(..., d) -> (...)`` and a subgradient maps ``(..., d) -> (..., d)``.
Builtins are assembled from module-level functions bound with
:func:`functools.partial`, so potentials pickle cleanly into worker processes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np

from . import _closed_form
from ._rng import stream

Array = np.ndarray


class DimensionError(ValueError):
    """Input vector length does not match the potential's dimension."""


@dataclass(frozen=True)
class SemiSmoothSpec:
    """Hölder condition |f'(u) - f'(v)| <= l_alpha |u - v|^alpha."""

    alpha: float
    l_alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not (self.l_alpha > 0 and math.isfinite(self.l_alpha)):
            raise ValueError(f"l_alpha must be positive and finite, got {self.l_alpha}")


@dataclass(frozen=True)
class Component:
    energy: Callable[[Array], Array]
    grad: Callable[[Array], Array]
    spec: SemiSmoothSpec
    name: str = "component"
    # Optional predicate (x, h) -> bool telling whether x lies within h of a kink.
    near_kink: Callable[[Array, float], bool] | None = None


@dataclass(frozen=True)
class Potential:
    dim: int
    components: tuple[Component, ...]
    name: str = "potential"
    # Optional closed-form map (y, eta) -> x_y for the whole sum.
    prox: Callable[[Array, float], Array] | None = None
    # Parameters of a builtin, kept for reports.
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if not self.components:
            raise ValueError("a potential needs at least one component")
        object.__setattr__(self, "components", tuple(self.components))
        probe = np.zeros(self.dim)
        for comp in self.components:
            e = np.asarray(comp.energy(probe))
            g = np.asarray(comp.grad(probe))
            if e.shape != () or g.shape != (self.dim,):
                raise ValueError(f"component {comp.name!r} does not accept vectors of length {self.dim}")

    @property
    def specs(self) -> list[SemiSmoothSpec]:
        return [c.spec for c in self.components]

    @property
    def spec(self) -> SemiSmoothSpec:
        """The single declared spec; composite potentials must use ``specs``."""
        if len(self.components) != 1:
            raise ValueError(f"{self.name} is composite; use .specs")
        return self.components[0].spec

    @property
    def is_composite(self) -> bool:
        return len(self.components) > 1

    def shifted(self, c: float) -> "Potential":
        """Same potential plus a constant ``c`` (added as an extra zero-gradient term)."""
        comps = list(self.components)
        first = comps[0]
        comps[0] = Component(
            partial(_plus_constant, first.energy, float(c)), first.grad, first.spec, first.name, first.near_kink
        )
        return Potential(self.dim, tuple(comps), self.name, self.prox, dict(self.params, constant=c))


def _plus_constant(energy, c, x):
    return energy(x) + c


def _check_dim(p: Potential, x: Array) -> Array:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != p.dim:
        raise DimensionError(f"{p.name} expects vectors of length {p.dim}, got shape {x.shape}")
    return x


def eval_potential(p: Potential, x) -> Array | float:
    """Sum of component energies, accumulated in component order."""
    x = _check_dim(p, x)
    total = p.components[0].energy(x)
    for comp in p.components[1:]:
        total = total + comp.energy(x)
    return float(total) if x.ndim == 1 else total


def eval_subgradient(p: Potential, x) -> Array:
    """Sum of component subgradients (minimal-norm selection at kinks)."""
    x = _check_dim(p, x)
    total = p.components[0].grad(x)
    for comp in p.components[1:]:
        total = total + comp.grad(x)
    return np.asarray(total, dtype=float)


# ---------------------------------------------------------------------------
# empirical validators


@dataclass
class SemiSmoothReport:
    max_ratio: list[float]
    declared: list[float]
    flagged: list[str]

    @property
    def ok(self) -> bool:
        return not self.flagged


def _uniform_ball(rng: np.random.Generator, n: int, d: int, radius: float) -> Array:
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * radius * rng.random((n, 1)) ** (1.0 / d)


def empirical_semismooth_check(p: Potential, n_pairs: int, radius: float, seed: int) -> SemiSmoothReport:
    """Max observed |f_j'(u) - f_j'(v)| / |u - v|^alpha_j over uniform pairs in a ball."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    if radius <= 0:
        raise ValueError("radius must be positive")
    rng = stream(seed, 0)
    u = _uniform_ball(rng, n_pairs, p.dim, radius)
    v = _uniform_ball(rng, n_pairs, p.dim, radius)
    dist = np.linalg.norm(u - v, axis=1)
    keep = dist > 0
    ratios, declared, flagged = [], [], []
    for comp in p.components:
        num = np.linalg.norm(comp.grad(u[keep]) - comp.grad(v[keep]), axis=1)
        ratio = float(np.max(num / dist[keep] ** comp.spec.alpha)) if keep.any() else 0.0
        ratios.append(ratio)
        declared.append(comp.spec.l_alpha)
        # Relative slack for rounding in the gradient differences.
        if ratio > comp.spec.l_alpha * (1 + 1e-9):
            flagged.append(comp.name)
    return SemiSmoothReport(ratios, declared, flagged)


@dataclass
class FiniteDifferenceResult:
    error: float
    near_kink: bool


def finite_difference_check(p: Potential, x, h: float) -> FiniteDifferenceResult:
    """Max coordinate error between central differences of f and the reported subgradient."""
    if h <= 0:
        raise ValueError("h must be positive")
    x = _check_dim(p, x)
    if x.ndim != 1:
        raise DimensionError("finite_difference_check takes a single point")
    eye = np.eye(p.dim) * h
    fd = (eval_potential(p, x + eye) - eval_potential(p, x - eye)) / (2 * h)
    err = float(np.max(np.abs(fd - eval_subgradient(p, x))))
    kink = any(c.near_kink is not None and c.near_kink(x, h) for c in p.components)
    return FiniteDifferenceResult(err, kink)


def sampled_energy_floor(p: Potential, half_width: float, n: int, seed: int) -> float:
    """Smallest energy over ``n`` uniform points in the box [-half_width, half_width]^d."""
    pts = stream(seed, 1).uniform(-half_width, half_width, size=(n, p.dim))
    vals = eval_potential(p, pts)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError(f"{p.name}: non-finite energy inside the test box")
    return float(np.min(vals))


# ---------------------------------------------------------------------------
# builtin component pieces


def _quad_energy(a, b, x):
    return 0.5 * np.sum(a * x * x, axis=-1) - np.sum(b * x, axis=-1)


def _quad_grad(a, b, x):
    return a * x - b


def _l1_energy(lam, x):
    return lam * np.sum(np.abs(x), axis=-1)


def _l1_grad(lam, x):
    return lam * np.sign(x)


def _l1_kink(x, h):
    return bool(np.any(np.abs(x) < h))


def _norm_energy(l0, x):
    return l0 * np.linalg.norm(x, axis=-1)


def _norm_grad(l0, x):
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r > 0, l0 * x / r, 0.0)


def _norm_kink(x, h):
    return bool(np.linalg.norm(x) < h)


def _huber_energy(w, x):
    ax = np.abs(x)
    return np.sum(np.where(ax <= w, 0.5 * x * x / w, ax - 0.5 * w), axis=-1)


def _huber_grad(w, x):
    return np.clip(x / w, -1.0, 1.0)


def _huber_kink(w, x, h):
    # Huber is C^1 but its second derivative jumps at |x| = w.
    return bool(np.any(np.abs(np.abs(x) - w) < h))


def _mixture_energy(mu, x):
    t = x @ mu
    return 0.5 * np.sum(x * x, axis=-1) - (np.logaddexp(t, -t) - math.log(2.0))


def _mixture_grad(mu, x):
    return x - np.tanh(x @ mu)[..., None] * mu


def _linear_energy(b, x):
    return np.sum(b * x, axis=-1)


def _linear_grad(b, x):
    return np.broadcast_to(b, x.shape).astype(float)


def _zero_energy(x):
    return np.zeros(x.shape[:-1])


def _zero_grad(x):
    return np.zeros(x.shape)


def _vec(values, d: int | None = None, name: str = "vector") -> Array:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1 or (d is not None and arr.shape[0] != d):
        raise ValueError(f"{name} must be a vector of length {d}")
    return arr


# ---------------------------------------------------------------------------
# builtin catalogue


def isotropic_gaussian(dim: int) -> Potential:
    """f(x) = |x|^2 / 2."""
    a, b = np.ones(dim), np.zeros(dim)
    comp = Component(partial(_quad_energy, a, b), partial(_quad_grad, a, b), SemiSmoothSpec(1.0, 1.0), "half_sq_norm")
    return Potential(dim, (comp,), "isotropic_gaussian", partial(_closed_form.quadratic, a=a, b=b), {"dim": dim})


def aniso_quadratic(diag: Sequence[float], b: Sequence[float] | None = None) -> Potential:
    """f(x) = x^T A x / 2 - b^T x with A = diag(diag)."""
    a = _vec(diag, name="diag")
    bb = np.zeros_like(a) if b is None else _vec(b, a.size, "b")
    spec = SemiSmoothSpec(1.0, float(np.max(np.abs(a))) or 1.0)
    comp = Component(partial(_quad_energy, a, bb), partial(_quad_grad, a, bb), spec, "quadratic")
    return Potential(
        a.size, (comp,), "aniso_quadratic", partial(_closed_form.quadratic, a=a, b=bb),
        {"diag": a.tolist(), "b": bb.tolist()},
    )


def norm_potential(dim: int, l0: float = 1.0) -> Potential:
    """f(x) = l0 |x|; subgradient differences are bounded by 2 l0."""
    comp = Component(
        partial(_norm_energy, l0), partial(_norm_grad, l0), SemiSmoothSpec(0.0, 2.0 * l0), "norm", _norm_kink
    )
    return Potential(dim, (comp,), "norm", partial(_closed_form.norm, l0=l0), {"dim": dim, "l0": l0})


def l1(dim: int, lam: float = 1.0) -> Potential:
    """f(x) = lam * sum |x_i|."""
    comp = Component(
        partial(_l1_energy, lam), partial(_l1_grad, lam), SemiSmoothSpec(0.0, 2.0 * lam * math.sqrt(dim)), "l1",
        _l1_kink,
    )
    zeros = np.zeros(dim)
    return Potential(dim, (comp,), "l1", partial(_closed_form.quadratic_l1, a=zeros, lam=lam), {"dim": dim, "lam": lam})


def huber(dim: int, width: float = 1.0) -> Potential:
    """Per-coordinate Huber: t^2/(2w) for |t| <= w, |t| - w/2 beyond."""
    if width <= 0:
        raise ValueError("width must be positive")
    comp = Component(
        partial(_huber_energy, width), partial(_huber_grad, width), SemiSmoothSpec(1.0, 1.0 / width), "huber",
        partial(_huber_kink, width),
    )
    return Potential(dim, (comp,), "huber", partial(_closed_form.huber, width=width), {"dim": dim, "width": width})


def gaussian_mixture(mean: Sequence[float]) -> Potential:
    """Equal mixture of N(mean, I) and N(-mean, I), up to an additive constant."""
    mu = _vec(mean, name="mean")
    s2 = float(mu @ mu)
    spec = SemiSmoothSpec(1.0, max(1.0, s2 - 1.0))
    comp = Component(partial(_mixture_energy, mu), partial(_mixture_grad, mu), spec, "mixture")
    return Potential(mu.size, (comp,), "gaussian_mixture", None, {"mean": mu.tolist()})


def composite_quadratic_l1(diag: Sequence[float], lam: float) -> Potential:
    """f(x) = x^T A x / 2 + lam * sum |x_i| as two components."""
    a = _vec(diag, name="diag")
    zeros = np.zeros_like(a)
    quad = Component(
        partial(_quad_energy, a, zeros), partial(_quad_grad, a, zeros),
        SemiSmoothSpec(1.0, float(np.max(np.abs(a))) or 1.0), "quadratic",
    )
    reg = Component(
        partial(_l1_energy, lam), partial(_l1_grad, lam), SemiSmoothSpec(0.0, 2.0 * lam * math.sqrt(a.size)), "l1",
        _l1_kink,
    )
    return Potential(
        a.size, (quad, reg), "composite_quad_l1", partial(_closed_form.quadratic_l1, a=a, lam=lam),
        {"diag": a.tolist(), "lam": lam},
    )


def linear(b: Sequence[float]) -> Potential:
    """f(x) = b^T x (declared smooth with unit constant)."""
    bb = _vec(b, name="b")
    comp = Component(partial(_linear_energy, bb), partial(_linear_grad, bb), SemiSmoothSpec(1.0, 1.0), "linear")
    return Potential(bb.size, (comp,), "linear", partial(_closed_form.linear, b=bb), {"b": bb.tolist()})


def zero(dim: int) -> Potential:
    """f = 0; the sampler then reduces to Gaussian noise."""
    comp = Component(_zero_energy, _zero_grad, SemiSmoothSpec(1.0, 1.0), "zero")
    return Potential(dim, (comp,), "zero", _closed_form.zero, {"dim": dim})


BUILTINS: dict[str, Callable[..., Potential]] = {
    "isotropic_gaussian": isotropic_gaussian,
    "aniso_quadratic": aniso_quadratic,
    "norm": norm_potential,
    "l1": l1,
    "huber": huber,
    "gaussian_mixture": gaussian_mixture,
    "composite_quad_l1": composite_quadratic_l1,
    "linear": linear,
    "zero": zero,
}


def build(name: str, **params) -> Potential:
    """Construct a builtin by catalogue name."""
    try:
        ctor = BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown target {name!r}; choose from {sorted(BUILTINS)}") from None
    return ctor(**params)


def coordinate_energy(p: Potential, i: int) -> Callable[[Array], Array] | None:
    """Energy of coordinate ``i`` when f is a sum of one-dimensional terms, else None.

    One-dimensional norm and mixture targets count as separable.
    """
    prm = p.params
    if p.name in ("isotropic_gaussian", "zero", "linear"):
        a = 1.0 if p.name == "isotropic_gaussian" else 0.0
        b = -prm["b"][i] if p.name == "linear" else 0.0
        return partial(_coord_quadratic, a, b, 0.0)
    if p.name == "aniso_quadratic":
        return partial(_coord_quadratic, prm["diag"][i], prm["b"][i], 0.0)
    if p.name == "composite_quad_l1":
        return partial(_coord_quadratic, prm["diag"][i], 0.0, prm["lam"])
    if p.name == "l1":
        return partial(_coord_quadratic, 0.0, 0.0, prm["lam"])
    if p.name == "huber":
        return partial(_coord_huber, prm["width"])
    if p.dim == 1 and p.name == "norm":
        return partial(_coord_quadratic, 0.0, 0.0, prm["l0"])
    if p.dim == 1 and p.name == "gaussian_mixture":
        return partial(_coord_mixture, prm["mean"][0])
    return None


def _coord_quadratic(a, b, lam, t):
    t = np.asarray(t, dtype=float)
    return 0.5 * a * t * t - b * t + lam * np.abs(t)


def _coord_huber(w, t):
    t = np.asarray(t, dtype=float)
    return np.where(np.abs(t) <= w, 0.5 * t * t / w, np.abs(t) - 0.5 * w)


def _coord_mixture(mu, t):
    t = np.asarray(t, dtype=float)
    return 0.5 * t * t - (np.logaddexp(mu * t, -mu * t) - math.log(2.0))


def gaussian_moments(p: Potential) -> tuple[Array, Array] | None:
    """Mean and diagonal covariance of exp(-f) when f is a builtin quadratic, else None."""
    if p.name == "isotropic_gaussian":
        return np.zeros(p.dim), np.ones(p.dim)
    if p.name == "aniso_quadratic":
        a = np.asarray(p.params["diag"])
        if np.any(a <= 0):
            return None
        return np.asarray(p.params["b"]) / a, 1.0 / a
    return None
