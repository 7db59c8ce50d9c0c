import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from unilateral import PolylineFunction, SamplePath, concave_majorant
from unilateral.errors import ConfigurationError, DomainError
from unilateral.groeneboom import (
    l_value,
    majorant_energy_between,
    q_cdf,
    q_density,
    sandwich_upper_bound,
    slln_experiment,
    tau,
    tau_grid,
    tau_sandwich_experiment,
    tau_samples,
)
from unilateral.paths import sample_wiener
from unilateral.stats import ks_two_sample

# bisection of the quadrature-defined CDF (nested quad of the defining expectation)
Q_MEDIAN = 0.16421443862974625


def q_oracle(t):
    """2 E(X/sqrt(t) - 1)_+ by quadrature against the normal density."""
    s = math.sqrt(t)
    f = lambda x: (x / s - 1.0) * math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return 2.0 * integrate.quad(f, s, np.inf, epsabs=1e-14, epsrel=1e-13)[0]


def q_cdf_oracle(t):
    return integrate.quad(q_oracle, 0.0, t, epsabs=1e-13, epsrel=1e-12, limit=200)[0]


ORACLE_T = np.geomspace(1e-3, 30.0, 20)


def test_tau_examples():
    p = SamplePath([0.0, 1.0, 2.0], [0.0, 2.0, 1.0])
    assert tau(p, 1.0).tau == 1.0
    line = SamplePath([0.0, 1.0, 2.0], [0.0, 1.0, 2.0])
    assert tau(line, 1.0).tau == 2.0
    with pytest.raises(DomainError):
        tau(p, 0.0)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=st.floats(0.05, 20.0), b=st.floats(0.05, 20.0))
def test_tau_exhaustive_and_monotone(seed, a, b):
    p = sample_wiener(tau_grid(0.05, 20.0, 2000), seed)
    tilted = p.values - p.times / a
    best = max(tilted)
    expected = max(t for t, v in zip(p.times, tilted) if v == best)
    assert tau(p, a).tau == expected
    lo, hi = sorted((a, b))
    assert tau(p, lo).tau <= tau(p, hi).tau


def test_truncation_flag():
    p = SamplePath([0.0, 1.0, 10.0], [0.0, 0.0, 50.0])
    assert tau(p, 1.0).truncated
    assert not tau(SamplePath([0.0, 1.0, 10.0], [0.0, 2.0, 0.0]), 1.0).truncated


def test_q_density_examples():
    assert q_density(1.0) == pytest.approx(2 * (0.241971 - 0.158655), abs=1e-5)
    assert q_density(1.0) == pytest.approx(q_oracle(1.0), rel=1e-12)
    mass = integrate.quad(q_density, 0.0, 1.0)[0] + integrate.quad(q_density, 1.0, np.inf)[0]
    assert mass == pytest.approx(1.0, abs=1e-8)
    t = np.linspace(10.0, 200.0, 400)
    assert np.all(q_density(t) <= 2.0 * np.exp(-t / 2) / np.sqrt(t))
    with pytest.raises(DomainError):
        q_density(0.0)


def test_q_density_against_oracle():
    np.testing.assert_allclose(q_density(ORACLE_T), [q_oracle(t) for t in ORACLE_T], rtol=1e-9, atol=1e-15)


def test_q_cdf_against_oracle():
    np.testing.assert_allclose(q_cdf(ORACLE_T), [q_cdf_oracle(t) for t in ORACLE_T], atol=1e-6)


def test_q_cdf_limits_and_median():
    assert q_cdf(0.0) == 0.0
    assert q_cdf(1e3) == pytest.approx(1.0, abs=1e-8)
    t = np.linspace(0.0, 50.0, 1001)
    assert np.all(np.diff(q_cdf(t)) >= 0)
    assert q_cdf(Q_MEDIAN) == pytest.approx(0.5, abs=1e-10)


def test_energy_between_examples():
    hull = PolylineFunction([(0, 0), (1, 2), (3, 3)], concave=True)
    assert majorant_energy_between(hull, 0.5, 2.0) == pytest.approx(2.25)
    assert majorant_energy_between(hull, 1.5, 1.5) == 0.0
    assert majorant_energy_between(hull, 1.5, 3.0) == pytest.approx(0.25 * 1.5)
    with pytest.raises(DomainError):
        majorant_energy_between(hull, 0.5, 4.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=st.floats(0.1, 3.0), b=st.floats(0.1, 3.0), c=st.floats(0.1, 3.0))
def test_l_additivity(seed, a, b, c):
    a, b, c = sorted((a, b, c))
    p = sample_wiener(tau_grid(0.1, 3.0, 3000), seed)
    hull = concave_majorant(p)
    ab = l_value(p, a, b, hull).value
    bc = l_value(p, b, c, hull).value
    ac = l_value(p, a, c, hull).value
    assert ab + bc == pytest.approx(ac, rel=1e-12, abs=1e-14)


def test_slln_small_run_and_empty():
    assert slln_experiment([], 10, 1) == []
    pts = slln_experiment([math.e, math.e**2], 200, 11, point_count=20_000)
    assert [p.count for p in pts] == [200, 200]
    for p in pts:
        assert abs(p.mean - 1.0) < 3.5 * p.stderr
    with pytest.raises(ConfigurationError):
        slln_experiment([2.0, 1.5], 1, 1)


def test_tau_scaling_law():
    # tau(a)/a**2 has the same law for every a
    s = {a: tau_samples(a, 2000, 5, point_count=5000, stream=i)[0] for i, a in enumerate((0.5, 1.0, 2.0))}
    assert ks_two_sample(s[0.5], s[1.0]) < 0.05
    assert ks_two_sample(s[2.0], s[1.0]) < 0.05
    assert ks_two_sample(s[0.5], s[2.0]) < 0.05


def test_sandwich_report_only_case():
    pts = tau_sandwich_experiment([10.0], 0.49, 200, 3, point_count=5000)
    assert pts[0].count == 200 and 0.0 <= pts[0].mean <= 1.0
    assert pts[0].extra["exact_frequency_bound"] == pytest.approx(sandwich_upper_bound(10.0, 0.49))
    with pytest.raises(ConfigurationError):
        tau_sandwich_experiment([10.0], 0.5, 1, 1)


def test_sandwich_frequency_bounded_by_exact_probability():
    # P(tau(a) > T) = 1 - q_cdf(T / a**2); at a = T**(1/2 + delta) this caps the frequency
    pts = tau_sandwich_experiment([10.0, 1e3], 0.25, 1000, 21, point_count=20_000)
    for p in pts:
        bound = p.extra["exact_frequency_bound"]
        assert p.mean <= bound + 3.0 * math.sqrt(bound * (1 - bound) / p.count)
