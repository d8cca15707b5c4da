"""Step-size formulas for the rejection-sampling oracle and run planning.

The TV formulas bound eta so that one oracle call lands within zeta of the
exact conditional in total variation; the W2 formulas do the same in
Wasserstein-2 and are capped at 1. Inexact-prox runs double the leading
constant (98 instead of 49).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .potentials import Potential, SemiSmoothSpec
from .proxmap import default_s

EXACT_CONSTANT = 49.0
APPROX_CONSTANT = 98.0
METRICS = ("TV", "W2")
MAX_PLAN_ROUNDS = 100
PLAN_START_T = 100


def _constant(mode: str) -> float:
    if mode == "exact":
        return EXACT_CONSTANT
    if mode == "approx":
        return APPROX_CONSTANT
    raise ValueError(f"mode must be 'exact' or 'approx', got {mode!r}")


def _check(d: int, zeta: float):
    if d < 1:
        raise ValueError("d must be >= 1")
    if not zeta > 0:
        raise ValueError("zeta must be positive")


def _scale(spec: SemiSmoothSpec, d: int) -> float:
    """L^{2/(a+1)} d^{a/(a+1)}."""
    a = spec.alpha
    return spec.l_alpha ** (2.0 / (a + 1.0)) * d ** (a / (a + 1.0))


def _tv_log(zeta: float, n: int = 1) -> float:
    return 1.0 + math.log1p(12.0 * n / zeta)


def _w2_log(d: int, zeta: float, n: int = 1) -> float:
    return 2.0 + math.log1p(192.0 * n * (d * d + 2.0 * d) / zeta**4)


def eta_tv(spec: SemiSmoothSpec, d: int, zeta: float, mode: str = "exact") -> float:
    _check(d, zeta)
    return 1.0 / (_constant(mode) * _scale(spec, d) * _tv_log(zeta))


def eta_w2(spec: SemiSmoothSpec, d: int, zeta: float, mode: str = "exact") -> float:
    _check(d, zeta)
    return min(1.0 / (_constant(mode) * _scale(spec, d) * _w2_log(d, zeta)), 1.0)


def _component_scales(specs: Sequence[SemiSmoothSpec], d: int) -> np.ndarray:
    if len(specs) == 0:
        raise ValueError("need at least one component spec")
    if d < 1:
        raise ValueError("d must be >= 1")
    return np.array(
        [sp.l_alpha ** (1.0 / (sp.alpha + 1.0)) * d ** (sp.alpha / (2.0 * (sp.alpha + 1.0))) for sp in specs]
    )


def composite_weights(specs: Sequence[SemiSmoothSpec], d: int) -> np.ndarray:
    """w_j proportional to L_j^{1/(a_j+1)} d^{a_j/(2(a_j+1))}, normalised to sum 1."""
    c = _component_scales(specs, d)
    return c / c.sum()


def composite_scale(specs: Sequence[SemiSmoothSpec], d: int) -> float:
    """M_{L,d} = (sum_j L_j^{1/(a_j+1)} d^{a_j/(2(a_j+1))})^2."""
    return float(math.fsum(_component_scales(specs, d))) ** 2


def eta_tv_composite(specs: Sequence[SemiSmoothSpec], d: int, zeta: float, mode: str = "exact") -> float:
    _check(d, zeta)
    return 1.0 / (_constant(mode) * composite_scale(specs, d) * _tv_log(zeta, len(specs)))


def eta_w2_composite(specs: Sequence[SemiSmoothSpec], d: int, zeta: float, mode: str = "exact") -> float:
    _check(d, zeta)
    return min(1.0 / (_constant(mode) * composite_scale(specs, d) * _w2_log(d, zeta, len(specs))), 1.0)


def eta_for(p: Potential, zeta: float, metric: str, mode: str) -> float:
    """Applicable step size for a potential: single or composite formula by component count."""
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
    if p.is_composite:
        fn = eta_tv_composite if metric == "TV" else eta_w2_composite
        return fn(p.specs, p.dim, zeta, mode)
    fn = eta_tv if metric == "TV" else eta_w2
    return fn(p.spec, p.dim, zeta, mode)


# ---------------------------------------------------------------------------
# assumption regimes


@dataclass(frozen=True)
class StronglyLogConcave:
    beta: float
    kl_init: float

    regime = "strongly_log_concave"


@dataclass(frozen=True)
class LogConcave:
    w2_init: float

    regime = "log_concave"


@dataclass(frozen=True)
class LSI:
    c_lsi: float
    kl_init: float

    regime = "lsi"


@dataclass(frozen=True)
class PI:
    c_pi: float
    chi2_init: float

    regime = "pi"


Assumption = StronglyLogConcave | LogConcave | LSI | PI
REGIMES = {cls.regime: cls for cls in (StronglyLogConcave, LogConcave, LSI, PI)}


def _validate_assumption(a) -> None:
    if not isinstance(a, (StronglyLogConcave, LogConcave, LSI, PI)):
        raise TypeError(f"unknown assumption {a!r}")
    for name, value in vars(a).items():
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise ValueError(f"{a.regime}: {name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class Plan:
    eta: float
    t_steps: int
    zeta: float
    delta: float
    metric: str
    mode: str
    assumption: object
    s: float | None = None
    rounds: int = 0

    @property
    def regime(self) -> str:
        return self.assumption.regime


class PlanningError(RuntimeError):
    def __init__(self, message: str, last: Plan | None = None):
        super().__init__(message)
        self.last = last


def steps_required(a, eta: float, delta: float, metric: str) -> int:
    """Smallest T meeting the regime's contraction target at step size eta."""
    if isinstance(a, StronglyLogConcave):
        arg = (2.0 / delta) * (math.sqrt(2.0 * a.kl_init) if metric == "TV" else math.sqrt(2.0 * a.kl_init / a.beta))
        t = math.log(arg) / math.log1p(a.beta * eta)
    elif isinstance(a, LSI):
        t = math.log((2.0 / delta) * math.sqrt(2.0 * a.kl_init)) / math.log1p(a.c_lsi * eta)
    elif isinstance(a, LogConcave):
        t = 8.0 * a.w2_init**2 / (delta**2 * eta)
    elif isinstance(a, PI):
        t = math.log(a.chi2_init / math.expm1(delta**2 / 8.0)) / (2.0 * math.log1p(a.c_pi * eta))
    else:
        raise TypeError(f"unknown assumption {a!r}")
    return max(1, math.ceil(t))


def plan_run(p: Potential, a, delta: float, metric: str = "TV", mode: str = "exact") -> Plan:
    """Solve for (T, eta, zeta) with zeta = delta / (2T) by fixed-point iteration from T = 100."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
    _constant(mode)
    _validate_assumption(a)
    if metric == "W2" and not isinstance(a, (StronglyLogConcave, LogConcave)):
        raise ValueError("W2 planning needs a log-concave regime; use TV for LSI and PI")
    if metric == "W2" and isinstance(a, LogConcave):
        raise ValueError("the log-concave regime is planned in TV only")

    s = min(default_s(sp, p.dim) for sp in p.specs) if mode == "approx" else None

    t = PLAN_START_T
    plan = None
    for rounds in range(1, MAX_PLAN_ROUNDS + 1):
        zeta = delta / (2.0 * t)
        eta = eta_for(p, zeta, metric, mode)
        plan = Plan(eta, t, zeta, delta, metric, mode, a, s, rounds)
        t_next = steps_required(a, eta, delta, metric)
        if t_next == t:
            return plan
        t = t_next
    raise PlanningError(f"step count did not settle in {MAX_PLAN_ROUNDS} rounds", plan)


def check_plan(p: Potential, plan: Plan) -> dict[str, bool]:
    """Re-evaluate a plan's defining relations."""
    eta_max = eta_for(p, plan.zeta, plan.metric, plan.mode)
    need = steps_required(plan.assumption, plan.eta, plan.delta, plan.metric)
    zt = plan.zeta * plan.t_steps
    return {
        "zeta_is_delta_over_2T": plan.zeta == plan.delta / (2.0 * plan.t_steps),
        "zeta_T_half_delta": bool(abs(zt - plan.delta / 2.0) <= 2.0 * np.spacing(plan.delta / 2.0)),
        "eta_within_bound": plan.eta <= eta_max,
        "steps_meet_regime": plan.t_steps >= need,
    }
