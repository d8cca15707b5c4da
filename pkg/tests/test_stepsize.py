from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proxsampler import potentials as pot
from proxsampler import stepsize as ss
from proxsampler.potentials import SemiSmoothSpec
from proxsampler.stepsize import (
    LSI,
    PI,
    LogConcave,
    PlanningError,
    StronglyLogConcave,
    check_plan,
    composite_weights,
    eta_tv,
    eta_tv_composite,
    eta_w2,
    eta_w2_composite,
    plan_run,
)

S11 = SemiSmoothSpec(1.0, 1.0)
S01 = SemiSmoothSpec(0.0, 1.0)


def test_eta_tv_examples():
    assert eta_tv(S11, 100, 0.01) == pytest.approx(1 / (49 * 10 * (1 + math.log(1201))), rel=1e-14)
    assert abs(eta_tv(S11, 100, 0.01) - 2.522e-4) <= 1e-7
    for d in (1, 7, 1000):
        assert eta_tv(S01, d, 1.0) == pytest.approx(1 / (49 * (1 + math.log(13))), rel=1e-14)
    assert eta_tv(S11, 9, 0.3) / eta_tv(S11, 36, 0.3) == pytest.approx(2.0, rel=1e-14)


def test_eta_w2_examples():
    assert eta_w2(S11, 4, 0.1) == pytest.approx(1 / (49 * 2 * (2 + math.log(1 + 192 * 24 / 1e-4))), rel=1e-14)
    assert abs(eta_w2(S11, 4, 0.1) - 5.19e-4) < 1e-6
    assert eta_w2(SemiSmoothSpec(1.0, 1e-12), 1, 1e6) == 1.0
    assert eta_w2(S01, 1, 1.0) == pytest.approx(1 / (49 * (2 + math.log(577))), rel=1e-14)


def test_approx_is_half_of_exact():
    for spec, d, zeta in itertools.product([S11, S01, SemiSmoothSpec(0.5, 3.0)], [1, 4, 50], [1e-3, 0.2, 0.9]):
        assert eta_tv(spec, d, zeta, "approx") == 0.5 * eta_tv(spec, d, zeta, "exact")


def test_composite_weights_examples():
    np.testing.assert_allclose(composite_weights([S11, S01], 16), [2 / 3, 1 / 3], atol=1e-12)
    np.testing.assert_array_equal(composite_weights([S11], 5), [1.0])
    np.testing.assert_allclose(composite_weights([S01, S01], 3), [0.5, 0.5], atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.tuples(st.floats(0, 1), st.floats(0.01, 100)), min_size=1, max_size=6),
    st.integers(1, 500),
    st.randoms(use_true_random=False),
)
def test_composite_weights_sum_and_permutation(pairs, d, rnd):
    specs = [SemiSmoothSpec(a, L) for a, L in pairs]
    w = composite_weights(specs, d)
    assert abs(w.sum() - 1.0) <= 1e-12 and np.all(w > 0)
    order = list(range(len(specs)))
    rnd.shuffle(order)
    np.testing.assert_allclose(composite_weights([specs[i] for i in order], d), w[order], rtol=1e-12, atol=0)


def test_eta_tv_composite_examples():
    for spec in (S11, S01, SemiSmoothSpec(0.3, 2.0)):
        assert eta_tv_composite([spec], 10, 0.2) == pytest.approx(eta_tv(spec, 10, 0.2), rel=1e-14)
    assert eta_tv_composite([S11, S01], 16, 0.1) == pytest.approx(1 / (49 * 9 * (1 + math.log(241))), rel=1e-14)
    assert abs(eta_tv_composite([S11, S01], 16, 0.1) - 3.50e-4) <= 1e-6
    base = eta_tv_composite([S01, SemiSmoothSpec(0.0, 3.0)], 5, 0.1)
    doubled = eta_tv_composite([SemiSmoothSpec(0.0, 2.0), SemiSmoothSpec(0.0, 6.0)], 5, 0.1)
    assert doubled == pytest.approx(base / 4, rel=1e-13)


def test_eta_w2_composite_examples():
    for spec in (S11, S01):
        assert eta_w2_composite([spec], 4, 0.1) == pytest.approx(eta_w2(spec, 4, 0.1), rel=1e-14)
    both = eta_w2_composite([S11, S01], 4, 0.1)
    m = (4**0.25 + 1) ** 2
    assert both == pytest.approx(1 / (49 * m * (2 + math.log(1 + 192 * 2 * 24 / 1e-4))), rel=1e-14)
    assert both < eta_w2(S11, 4, 0.1) and both < eta_w2(S01, 4, 0.1)
    assert eta_w2_composite([SemiSmoothSpec(1.0, 1e-12), SemiSmoothSpec(0.0, 1e-12)], 1, 1e6) == 1.0


GRID_L = [0.5, 1.0, 2.0, 4.0, 8.0]
GRID_D = [1, 2, 8, 32, 128]
GRID_Z = [1e-4, 1e-3, 1e-2, 0.1, 0.5]


@pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0])
@pytest.mark.parametrize("fn", [eta_tv, eta_w2], ids=["tv", "w2"])
def test_monotonicity_grid(alpha, fn):
    vals = np.array([[[fn(SemiSmoothSpec(alpha, L), d, z) for z in GRID_Z] for d in GRID_D] for L in GRID_L])
    assert np.all(vals < 1.0)
    assert np.all(np.diff(vals, axis=0) < 0)
    assert np.all(np.diff(vals, axis=2) > 0)
    if alpha > 0 or fn is eta_w2:
        assert np.all(np.diff(vals, axis=1) < 0)
    else:
        assert np.all(np.diff(vals, axis=1) == 0)


def assert_zeta_exact(plan):
    # zeta is the correctly rounded delta / (2T): within half an ulp in exact arithmetic.
    assert plan.zeta == plan.delta / (2 * plan.t_steps)
    err = abs(Fraction(plan.zeta) * plan.t_steps - Fraction(plan.delta) / 2)
    assert err <= Fraction(float(np.spacing(plan.zeta))) * plan.t_steps / 2


def _oracle_plan(a, L, d, delta, start=100):
    """Independent fixed-point search for the smooth single-component TV case."""
    t = start
    for _ in range(100):
        zeta = delta / (2 * t)
        eta = 1.0 / (49.0 * L ** (2 / 2) * d ** (1 / 2) * (1 + math.log(1 + 12 / zeta)))
        if isinstance(a, StronglyLogConcave):
            t_new = math.ceil(math.log((2 / delta) * math.sqrt(2 * a.kl_init)) / math.log(1 + a.beta * eta))
        else:
            t_new = math.ceil(8 * a.w2_init**2 / (delta**2 * eta))
        if t_new == t:
            return t, eta, zeta
        t = t_new
    raise AssertionError("oracle did not settle")


def test_plan_strongly_log_concave_example():
    p = pot.isotropic_gaussian(4)
    a = StronglyLogConcave(beta=1.0, kl_init=4.0)
    plan = plan_run(p, a, 0.1)
    t, eta, zeta = _oracle_plan(a, 1.0, 4, 0.1)
    assert plan.t_steps == t
    assert plan.eta == pytest.approx(eta, rel=1e-13)
    assert plan.zeta == zeta
    # Frozen regression values.
    assert plan.t_steps == 6006
    assert plan.eta == pytest.approx(6.7215454918e-4, rel=1e-9)
    assert plan.t_steps == math.ceil(math.log((2 / 0.1) * math.sqrt(8)) / math.log1p(plan.eta))


def test_plan_log_concave_example():
    p = pot.norm_potential(1, 0.5)  # spec (0, 1)
    plan = plan_run(p, LogConcave(w2_init=1.0), 0.5)
    assert plan.t_steps == math.ceil(8 / (0.25 * plan.eta))
    assert plan.eta == eta_tv(S01, 1, 0.5 / (2 * plan.t_steps))
    assert all(check_plan(p, plan).values())


def fixture_plans():
    aniso = pot.aniso_quadratic([1.0, 4.0])
    return [
        (aniso, StronglyLogConcave(1.0, 10.0), 0.2, "TV", "exact"),
        (aniso, StronglyLogConcave(1.0, 10.0), 0.2, "W2", "exact"),
        (pot.isotropic_gaussian(4), StronglyLogConcave(1.0, 4.0), 0.1, "TV", "approx"),
        (pot.norm_potential(3, 1.0), LogConcave(2.0), 0.3, "TV", "exact"),
        (pot.gaussian_mixture([1.0, 0.0]), LSI(0.5, 3.0), 0.2, "TV", "exact"),
        (pot.huber(4, 1.0), PI(0.25, 0.5), 0.2, "TV", "approx"),
        (pot.composite_quadratic_l1([1.0, 2.0], 0.5), StronglyLogConcave(1.0, 2.0), 0.25, "TV", "exact"),
        (pot.composite_quadratic_l1([1.0, 2.0], 0.5), PI(0.5, 1.0), 0.25, "TV", "approx"),
    ]


@pytest.mark.parametrize("case", fixture_plans(), ids=lambda c: f"{c[0].name}-{c[1].regime}-{c[3]}-{c[4]}")
def test_plans_are_self_consistent(case):
    p, a, delta, metric, mode = case
    plan = plan_run(p, a, delta, metric, mode)
    checks = check_plan(p, plan)
    assert all(checks.values()), checks
    assert_zeta_exact(plan)
    assert 1 <= plan.rounds <= 100


def test_plan_errors():
    p = pot.isotropic_gaussian(2)
    with pytest.raises(ValueError):
        plan_run(p, StronglyLogConcave(1.0, 1.0), 1.0)
    with pytest.raises(ValueError):
        plan_run(p, StronglyLogConcave(1.0, 1.0), 0.0)
    with pytest.raises(ValueError):
        plan_run(p, LSI(1.0, 1.0), 0.1, metric="W2")
    with pytest.raises(ValueError):
        plan_run(p, StronglyLogConcave(-1.0, 1.0), 0.1)
    with pytest.raises(ValueError):
        plan_run(p, StronglyLogConcave(1.0, 1.0), 0.1, mode="rough")


def test_planning_error_reports_last_iterate(monkeypatch):
    monkeypatch.setattr(ss, "MAX_PLAN_ROUNDS", 1)
    with pytest.raises(PlanningError) as err:
        plan_run(pot.isotropic_gaussian(2), StronglyLogConcave(1.0, 1.0), 0.1)
    assert err.value.last is not None and err.value.last.t_steps == ss.PLAN_START_T


def test_approx_plan_carries_default_s():
    p = pot.composite_quadratic_l1([1.0, 2.0], 0.5)
    plan = plan_run(p, PI(0.5, 1.0), 0.25, mode="approx")
    from proxsampler.proxmap import default_s

    assert plan.s == min(default_s(sp, 2) for sp in p.specs)
