from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from proxsampler.metrics import (
    NormalizationError,
    gaussian_density,
    grid_density,
    moment_check,
    sliced_w2,
    tv_histogram_1d,
    w2_empirical_1d,
    w2_empirical_assignment,
)


def test_w2_1d_examples():
    a = np.random.default_rng(0).normal(size=300)
    assert w2_empirical_1d(a, a).value == 0.0
    assert w2_empirical_1d(a, a + 1.0).value == pytest.approx(1.0, abs=1e-12)
    assert w2_empirical_1d([0.0, 2.0], [1.0, 3.0]).value == 1.0
    with pytest.raises(ValueError):
        w2_empirical_1d([], [1.0])


def test_w2_1d_subsamples_larger_set():
    est = w2_empirical_1d(np.zeros(10), np.zeros(25))
    assert est.n_used == 10 and est.value == 0.0


def test_assignment_examples():
    a = np.random.default_rng(1).normal(size=(40, 3))
    assert w2_empirical_assignment(a, a).value == 0.0
    v = np.array([0.5, -1.0, 2.0])
    assert w2_empirical_assignment(a, a + v).value == pytest.approx(np.linalg.norm(v), rel=1e-12)
    assert w2_empirical_assignment([[0, 0], [1, 0]], [[0, 1], [1, 1]]).value == 1.0


def test_assignment_reduces_to_sorted_coupling_in_1d():
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=100), rng.exponential(size=100)
    assert w2_empirical_assignment(a, b).value == pytest.approx(w2_empirical_1d(a, b).value, abs=1e-9)


def test_assignment_caps_sample_size():
    rng = np.random.default_rng(3)
    est = w2_empirical_assignment(rng.normal(size=(700, 2)), rng.normal(size=(900, 2)), n_cap=64)
    assert est.n_used == 64


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, (12, 2), elements=st.floats(-10, 10)),
       arrays(np.float64, (12, 2), elements=st.floats(-10, 10)))
def test_w2_family_symmetric_nonnegative_and_projection_contracts(a, b):
    ab = w2_empirical_assignment(a, b).value
    assert ab == pytest.approx(w2_empirical_assignment(b, a).value, rel=1e-12, abs=1e-12)
    assert ab >= 0
    for k in range(2):
        proj = w2_empirical_1d(a[:, k], b[:, k]).value
        assert proj == pytest.approx(w2_empirical_1d(b[:, k], a[:, k]).value, abs=1e-12)
        assert ab >= proj - 1e-9
    s1 = sliced_w2(a, b, 16, seed=1).value
    assert s1 >= 0 and s1 == pytest.approx(sliced_w2(b, a, 16, seed=1).value, rel=1e-12, abs=1e-12)
    assert s1 <= ab + 1e-9


def test_sliced_examples():
    rng = np.random.default_rng(4)
    a = rng.normal(size=(500, 3))
    assert sliced_w2(a, a).value == 0.0
    x, y = rng.normal(size=400), rng.normal(size=400) * 2
    assert sliced_w2(x, y, 16).value == pytest.approx(w2_empirical_1d(x, y).value, rel=1e-12)
    with pytest.raises(ValueError):
        sliced_w2(a, a, n_directions=8)


def test_sliced_mean_shift():
    rng = np.random.default_rng(5)
    d = 5
    mu = np.array([1.0, -0.5, 0.0, 0.5, 0.0])
    a = rng.normal(size=(20_000, d))
    b = rng.normal(size=(20_000, d)) + mu
    est = sliced_w2(a, b, n_directions=2000, seed=2).value
    assert est**2 == pytest.approx(mu @ mu / d, rel=0.10)


def test_bootstrap_contains_estimate():
    rng = np.random.default_rng(6)
    a, b = rng.normal(size=(200, 2)), rng.normal(size=(200, 2)) + 0.3
    for est in (w2_empirical_1d(a[:, 0], b[:, 0], bootstrap=200), w2_empirical_assignment(a, b, bootstrap=200),
                sliced_w2(a, b, bootstrap=200)):
        lo, hi = est.bootstrap_ci
        assert lo <= est.value <= hi


def test_tv_matches_own_density():
    x = np.random.default_rng(7).normal(size=100_000)
    assert tv_histogram_1d(x, gaussian_density(0.0, 1.0), bins=64).value <= 0.03


def test_tv_unit_gaussians_one_apart():
    x = np.random.default_rng(8).normal(size=200_000)
    got = tv_histogram_1d(x, gaussian_density(1.0, 1.0), bins=64, support=(-6, 7)).value
    assert got == pytest.approx(2 * stats.norm.cdf(0.5) - 1, abs=0.02)


def test_tv_disjoint_is_one():
    x = np.random.default_rng(9).normal(size=10_000)
    got = tv_histogram_1d(x, gaussian_density(100.0, 1.0), bins=32, support=(-5, 5)).value
    assert got == pytest.approx(1.0, abs=1e-6)


def test_tv_errors():
    with pytest.raises(NormalizationError):
        tv_histogram_1d(np.zeros(10), lambda t: 2 * gaussian_density(0.0, 1.0)(t), bins=16, support=(-5, 5))
    with pytest.raises(ValueError):
        tv_histogram_1d(np.zeros(10), gaussian_density(0.0, 1.0), bins=8)
    with pytest.raises(ValueError):
        tv_histogram_1d([], gaussian_density(0.0, 1.0))


def test_grid_density_normalises():
    pdf = grid_density(lambda t: -np.abs(t), -40, 40)
    assert float(pdf(np.array([0.0]))[0]) == pytest.approx(0.5, rel=1e-6)
    assert float(pdf(np.array([50.0]))[0]) == 0.0


def test_moment_check_z_scores():
    x = np.random.default_rng(10).normal(2.0, 3.0, size=(50_000, 2))
    assert moment_check(x, [2.0, 2.0], [9.0, 9.0]).ok(4.0)
    bad = moment_check(x, [2.5, 2.0], [9.0, 9.0])
    assert abs(bad.mean_z[0]) > 10 and not bad.ok(4.0)
    assert math.isfinite(bad.var_z[1])
