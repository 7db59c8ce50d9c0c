import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ndtr

from unilateral import GridSpec, SamplePath, brownian_scaling, replication_seed, sample_wiener, to_ou
from unilateral.errors import ConfigurationError, DomainError, MalformedInputError
from unilateral.majorant import concave_majorant, energy
from unilateral.paths import cached_times, grid_times
from unilateral.stats import ks_statistic


def test_path_validation():
    with pytest.raises(MalformedInputError):
        SamplePath([0.0], [0.0])
    with pytest.raises(MalformedInputError):
        SamplePath([0.0, 1.0, 1.0], [0.0, 1.0, 2.0])
    with pytest.raises(MalformedInputError):
        SamplePath([0.0, 1.0], [0.0])
    with pytest.raises(MalformedInputError):
        SamplePath([0.0, 1.0], [0.0, np.nan])


@pytest.mark.parametrize("bad", [dict(horizon=0.0, point_count=5), dict(horizon=1.0, point_count=1),
                                 dict(horizon=-1.0, point_count=5)])
def test_invalid_grid(bad):
    with pytest.raises(ConfigurationError):
        GridSpec.uniform(**bad)


def test_uniform_grid_step():
    t = GridSpec.uniform(3.0, 4).times()
    np.testing.assert_allclose(np.diff(t), 1.0)


@pytest.mark.parametrize("horizon,n,h0", [(1.0, 100, 1e-4), (40 * 2.0**24, 2**22, 1e-4), (4e13, 40_000, 1e-2)])
def test_geometric_grid_covers_horizon(horizon, n, h0):
    g = GridSpec.geometric(horizon, n, h0)
    t = g.times()
    assert t.size == n and t[0] == 0.0 and t[-1] == horizon
    assert np.all(np.diff(t) > 0)
    assert t[1] == pytest.approx(h0, rel=1e-9)
    assert g.first_cell == pytest.approx(h0, rel=1e-9)
    ratios = np.diff(t)[1:] / np.diff(t)[:-1]
    np.testing.assert_allclose(ratios[: n // 2], g.geometric_ratio, rtol=1e-6)


def test_geometric_first_cell_too_large():
    with pytest.raises(ConfigurationError):
        GridSpec.geometric(1.0, 11, 0.2)


def test_extra_knots_are_merged():
    g = GridSpec.geometric(100.0, 50, 1e-3)
    t = cached_times(g, (3.0, 7.5))
    assert 3.0 in t and 7.5 in t
    assert not t.flags.writeable
    np.testing.assert_array_equal(t, grid_times(g, (3.0, 7.5)))


def test_wiener_starts_at_zero_and_is_reproducible():
    g = GridSpec.geometric(10.0, 1000, 1e-4)
    a = sample_wiener(g, 7)
    b = sample_wiener(g, 7)
    assert a.values[0] == 0.0
    assert a.values.tobytes() == b.values.tobytes()
    assert sample_wiener(g, 8) != a


def test_replication_seeds_are_distinct_and_stable():
    g = GridSpec.uniform(1.0, 3)
    w = [sample_wiener(g, replication_seed(5, k)).values[-1] for k in range(4)]
    assert len(set(w)) == 4
    assert w[2] == sample_wiener(g, replication_seed(5, 2)).values[-1]
    assert sample_wiener(g, replication_seed(5, 2, stream=1)).values[-1] != w[2]


def _endpoint_samples(grid, n):
    times = grid.times()
    return np.array([sample_wiener(times, replication_seed(99, k)).values for k in range(n)])


def test_wiener_variance_and_independent_increments():
    w1 = _endpoint_samples(GridSpec.uniform(1.0, 2), 100_000)[:, 1]
    assert 0.98 <= w1.var() <= 1.02
    w = _endpoint_samples(GridSpec.uniform(4.0, 5), 100_000)
    a, b = w[:, 1], w[:, 4] - w[:, 1]
    assert -0.02 <= np.cov(a, b)[0, 1] <= 0.02


def test_increments_are_standard_normal():
    g = GridSpec.geometric(10.0, 20, 1e-3)
    w = _endpoint_samples(g, 100_000)
    dt = np.diff(g.times())
    for cell in (0, 10, 18):
        z = (w[:, cell + 1] - w[:, cell]) / math.sqrt(dt[cell])
        assert ks_statistic(z, ndtr) < 0.01


def test_to_ou_examples():
    p = SamplePath([0.0, 0.5, 1.0, math.e**2], [0.0, 0.3, 0.7, 2.0])
    ou = to_ou(p)
    np.testing.assert_allclose(ou.times, [0.0, 2.0])
    np.testing.assert_allclose(ou.values, [0.7, 2.0 / math.e])
    with pytest.raises(DomainError):
        to_ou(SamplePath([0.0, 0.5, 0.9], [0.0, 1.0, 2.0]))


def test_ou_is_stationary_with_unit_variance():
    times = np.array([0.0, 1.0, math.exp(3.0)])
    u3 = np.array([to_ou(sample_wiener(times, replication_seed(3, k))).values[-1] for k in range(100_000)])
    assert 0.97 <= u3.var() <= 1.03


def test_brownian_scaling_examples():
    p = SamplePath([0.0, 1.0], [0.0, 2.0])
    assert brownian_scaling(p, 1.0) == p
    q = brownian_scaling(p, 4.0)
    np.testing.assert_allclose(q.times, [0.0, 0.25])
    np.testing.assert_allclose(q.values, [0.0, 1.0])
    assert energy(p) == pytest.approx(4.0)
    assert energy(q) == pytest.approx(4.0)
    with pytest.raises(DomainError):
        brownian_scaling(p, 0.0)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), c=st.floats(1e-3, 1e3))
def test_scaling_preserves_majorant_energy(seed, c):
    p = sample_wiener(GridSpec.geometric(50.0, 300, 1e-3), seed)
    e0 = energy(concave_majorant(p))
    e1 = energy(concave_majorant(brownian_scaling(p, c)))
    assert e1 == pytest.approx(e0, rel=1e-10)


def test_restrict_and_subsample():
    p = sample_wiener(GridSpec.uniform(10.0, 11), 0)
    assert p.restrict(4.0).horizon == 4.0
    s = p.subsample(3, keep=[4.0])
    np.testing.assert_array_equal(s.times, [0.0, 3.0, 4.0, 6.0, 9.0, 10.0])
