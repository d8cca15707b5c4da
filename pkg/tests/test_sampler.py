from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate

from proxsampler import potentials as pot
from proxsampler.metrics import gaussian_density, moment_check, tv_histogram_1d
from proxsampler.sampler import (
    SamplerError,
    gaussian_variance_recursion,
    reference_samples,
    run_baseline,
    run_proximal_sampler,
)
from proxsampler.stepsize import Plan, StronglyLogConcave, eta_tv, plan_run


def manual_plan(p, zeta, t_steps, delta=None):
    eta = eta_tv(p.spec, p.dim, zeta)
    return Plan(eta, t_steps, zeta, delta if delta is not None else 2 * zeta * t_steps, "TV", "exact",
                StronglyLogConcave(1.0, 1.0))


def test_zero_steps_returns_start():
    p = pot.isotropic_gaussian(2)
    tr = run_proximal_sampler(p, manual_plan(p, 0.1, 0), [1.0, 2.0], seed=0)
    assert tr.t_steps == 0
    np.testing.assert_array_equal(tr.samples, [[[1.0, 2.0]]])
    np.testing.assert_array_equal(tr.final, [[1.0, 2.0]])


def test_same_seed_same_trace():
    p = pot.huber(2, 1.0)
    plan = manual_plan(p, 0.01, 50)
    a = run_proximal_sampler(p, plan, [3.0, -1.0], seed=4, n_chains=5, record_stride=7)
    b = run_proximal_sampler(p, plan, [3.0, -1.0], seed=4, n_chains=5, record_stride=7)
    np.testing.assert_array_equal(a.samples, b.samples)
    np.testing.assert_array_equal(a.proposals, b.proposals)
    np.testing.assert_array_equal(a.steps, np.array([0, 7, 14, 21, 28, 35, 42, 49]))
    c = run_proximal_sampler(p, plan, [3.0, -1.0], seed=5, n_chains=5, record_stride=7)
    assert not np.array_equal(a.final, c.final)


def test_jobs_do_not_change_results():
    p = pot.isotropic_gaussian(2)
    plan = manual_plan(p, 0.05, 30)
    kw = dict(seed=9, n_chains=200, chain_block=64, snapshot_steps=(10,))
    a = run_proximal_sampler(p, plan, [1.0, 1.0], jobs=1, **kw)
    b = run_proximal_sampler(p, plan, [1.0, 1.0], jobs=3, **kw)
    np.testing.assert_array_equal(a.samples, b.samples)
    np.testing.assert_array_equal(a.snapshots[10], b.snapshots[10])
    np.testing.assert_array_equal(a.proposals, b.proposals)


def test_per_step_records():
    p = pot.isotropic_gaussian(1)
    tr = run_proximal_sampler(p, manual_plan(p, 0.05, 40), [0.0], seed=1, n_chains=10)
    steps = tr.per_step()
    assert len(steps) == 40
    assert all(prop >= 1 for prop, _ in steps)


def test_variance_recursion_oracle():
    p = pot.isotropic_gaussian(1)
    plan = manual_plan(p, 0.05, 300)
    tr = run_proximal_sampler(p, plan, [3.0], seed=2, n_chains=2000, record_stride=100)
    v = gaussian_variance_recursion(0.0, plan.eta, plan.t_steps)
    m = 3.0 / (1 + plan.eta) ** np.arange(plan.t_steps + 1)
    for k, t in enumerate(tr.steps[1:], start=1):
        mc = moment_check(tr.samples[k], [m[t]], [v[t]])
        assert mc.ok(4.0), (t, mc.mean_z, mc.var_z)


def test_variance_recursion_limit():
    v = gaussian_variance_recursion(5.0, 0.1, 2000)
    assert v[-1] == pytest.approx(1.0, abs=1e-12)
    v = gaussian_variance_recursion(1.0, 0.3, 10)
    np.testing.assert_allclose(v, 1.0, atol=1e-15)


def test_telescoping_tv_bound():
    p = pot.isotropic_gaussian(1)
    plan = plan_run(p, StronglyLogConcave(1.0, 1.0), 0.5)
    tr = run_proximal_sampler(p, plan, [3.0], seed=6, n_chains=2000)
    T = plan.t_steps
    mean = 3.0 / (1 + plan.eta) ** T
    var = gaussian_variance_recursion(0.0, plan.eta, T)[-1]
    tv = tv_histogram_1d(tr.final[:, 0], gaussian_density(mean, var), bins=16,
                         support=(mean - 4 * math.sqrt(var), mean + 4 * math.sqrt(var))).value
    assert tv <= plan.zeta * T + 0.03
    assert tr.mean_proposals <= 4.0


def test_give_up_reports_step():
    p = pot.isotropic_gaussian(1)
    with pytest.raises(SamplerError) as err:
        run_proximal_sampler(p, manual_plan(p, 0.05, 5), [0.0], seed=0, n_chains=300, max_proposals=1)
    assert err.value.step == 1


def test_evaluations_per_chain_counts():
    p = pot.isotropic_gaussian(1)
    tr = run_proximal_sampler(p, manual_plan(p, 0.05, 20), [0.0], seed=0, n_chains=4)
    expected = (2 * tr.proposals.sum() + 20 * 4) / 4
    assert tr.evaluations_per_chain() == pytest.approx(expected)


def test_starts_per_chain():
    p = pot.isotropic_gaussian(2)
    x0 = np.arange(6.0).reshape(3, 2)
    tr = run_proximal_sampler(p, manual_plan(p, 0.05, 0), x0, seed=0, n_chains=3)
    np.testing.assert_array_equal(tr.final, x0)
    with pytest.raises(ValueError):
        run_proximal_sampler(p, manual_plan(p, 0.05, 1), np.zeros((2, 2)), seed=0, n_chains=3)


def test_ula_stationary_variance():
    eta = 0.1
    tr = run_baseline("ULA", pot.isotropic_gaussian(1), eta, 300, [0.0], seed=3, n_chains=4000)
    target = 1.0 / (1.0 - eta / 2.0)
    mc = moment_check(tr.final, [0.0], [target])
    assert abs(mc.var_z[0]) <= 4.0
    assert tr.evals_per_step == 1


def test_mala_acceptance_and_determinism():
    p = pot.isotropic_gaussian(1)
    a = run_baseline("MALA", p, 1e-3, 100_000, [0.0], seed=1)
    assert a.accept_rate >= 0.9
    b = run_baseline("MALA", p, 1e-3, 1000, [0.0], seed=1, record_stride=1)
    c = run_baseline("MALA", p, 1e-3, 1000, [0.0], seed=1, record_stride=1)
    np.testing.assert_array_equal(b.samples, c.samples)
    assert b.accept_rate == c.accept_rate


def test_baseline_errors():
    with pytest.raises(ValueError):
        run_baseline("MALA", pot.l1(1), 0.01, 10, [0.0], seed=0)
    with pytest.raises(ValueError):
        run_baseline("HMC", pot.isotropic_gaussian(1), 0.01, 10, [0.0], seed=0)


def _quad_var(energy):
    z = integrate.quad(lambda t: math.exp(-energy(t)), -np.inf, np.inf)[0]
    return integrate.quad(lambda t: t * t * math.exp(-energy(t)), -np.inf, np.inf)[0] / z


def test_reference_samples_moments():
    n = 200_000
    cases = [
        (pot.aniso_quadratic([1.0, 4.0], [1.0, 0.0]), [1.0, 0.0], [1.0, 0.25]),
        (pot.l1(2, 2.0), [0.0, 0.0], [0.5, 0.5]),
        (pot.gaussian_mixture([1.5, 0.0]), [0.0, 0.0], [1 + 1.5**2, 1.0]),
        (pot.huber(2, 1.0), [0.0, 0.0],
         [_quad_var(lambda t: 0.5 * t * t if abs(t) <= 1 else abs(t) - 0.5)] * 2),
        (pot.composite_quadratic_l1([1.0, 2.0], 0.5), [0.0, 0.0],
         [_quad_var(lambda t: 0.5 * t * t + 0.5 * abs(t)), _quad_var(lambda t: t * t + 0.5 * abs(t))]),
    ]
    for p, mean, var in cases:
        x = reference_samples(p, n, seed=1)
        assert moment_check(x, mean, var).ok(4.0), p.name
    # Norm target in d = 3: radius ~ Gamma(3, 1 / l0), so E|x|^2 = 12 / l0^2.
    x = reference_samples(pot.norm_potential(3, 2.0), n, seed=1)
    r2 = np.sum(x * x, axis=1)
    assert abs(r2.mean() - 3.0) <= 4 * r2.std() / math.sqrt(n)


def test_quasi_reference_is_gaussian_only():
    p = pot.aniso_quadratic([1.0, 4.0])
    x = reference_samples(p, 1024, seed=0, quasi=True)
    assert moment_check(x, [0.0, 0.0], [1.0, 0.25]).ok(4.0)
    with pytest.raises(ValueError):
        reference_samples(pot.huber(2), 16, seed=0, quasi=True)
