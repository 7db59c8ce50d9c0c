import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from unilateral.errors import DomainError
from unilateral.stats import PointStats, fit_log_slope, ks_statistic, ks_two_sample


def uniform_cdf(x):
    return np.clip(x, 0.0, 1.0)


def test_ks_examples():
    assert ks_statistic([0.5], uniform_cdf) == pytest.approx(0.5)
    n = 40
    quantiles = (np.arange(1, n + 1) - 0.5) / n
    assert ks_statistic(quantiles, uniform_cdf) == pytest.approx(0.5 / n)
    with pytest.raises(DomainError):
        ks_statistic([], uniform_cdf)


def test_ks_null_distribution():
    # 1.63 / sqrt(n) is the 99% point of the Kolmogorov distribution
    n = 2000
    stats = [ks_statistic(np.random.default_rng(s).random(n), uniform_cdf) for s in range(1000)]
    assert np.mean(np.array(stats) < 1.63 / math.sqrt(n)) >= 0.99


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_ks_bounds(xs):
    d = ks_statistic(xs, lambda x: 0.5 * (1 + np.tanh(x)))
    assert 0.0 <= d <= 1.0
    assert ks_two_sample(xs, xs) == 0.0


def test_ks_two_sample_disjoint():
    assert ks_two_sample([0, 1, 2], [5, 6]) == 1.0
    with pytest.raises(DomainError):
        ks_two_sample([], [1.0])


@pytest.mark.parametrize("scale,slope", [(0.5, 0.5), (1.0, 1.0)])
def test_fit_exact_lines(scale, slope):
    fit = fit_log_slope([(math.e**k, scale * k) for k in (1, 2, 3)])
    assert fit.slope == pytest.approx(slope)
    assert fit.intercept == pytest.approx(0.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)


def test_fit_noisy_line():
    T = np.exp(np.arange(1.0, 11.0))
    for seed in range(100):
        y = 0.5 * np.log(T) + np.random.default_rng(seed).normal(0.0, 0.01, T.size)
        assert 0.45 <= fit_log_slope(np.column_stack((T, y))).slope <= 0.55


@pytest.mark.parametrize("pts", [[(2, 1), (3, 2)], [(2, 1), (2, 1), (2, 3)], [(0.5, 1), (2, 1), (3, 1)]])
def test_fit_rejects_bad_input(pts):
    with pytest.raises(DomainError):
        fit_log_slope(pts)


def test_point_stats():
    p = PointStats.from_samples("T", 4.0, [1.0, 2.0, 3.0])
    assert (p.mean, p.std, p.count) == (2.0, 1.0, 3)
    assert p.stderr == pytest.approx(1 / math.sqrt(3))
    empty = PointStats.from_samples("T", 4.0, [])
    assert empty.count == 0 and empty.mean is None and empty.stderr is None
