import math

import numpy as np
import pytest
from scipy import integrate

from unilateral.errors import DomainError
from unilateral.oscillator import (
    DensityCandidate,
    GridFunction,
    drift_from_density,
    hermite_psi,
    j_functional,
    optimal_candidate,
    optimal_density,
    oscillator_eigenvalue,
    quadratic_form_G,
    random_admissible_function,
    rayleigh_quotient,
    solve_sturm_liouville,
)

X = np.linspace(0.0, 14.0, 40001)


@pytest.fixture(scope="module")
def solution():
    return solve_sturm_liouville(14.0, 8000, 3)


def test_psi1_values():
    # direct evaluation of (2/pi)**0.25 x exp(-x**2/4)
    assert hermite_psi(1, 1.0) == pytest.approx((2 / math.pi) ** 0.25 * math.exp(-0.25), rel=1e-14)
    assert hermite_psi(1, 1.0) == pytest.approx(0.695659, abs=1e-6)
    assert hermite_psi(1, 0.0) == 0.0
    with pytest.raises(DomainError):
        hermite_psi(2, 1.0)


@pytest.mark.parametrize("k,l", [(1, 1), (1, 3), (3, 3), (3, 5), (5, 5), (1, 5)])
def test_psi_orthonormal(k, l):
    val = integrate.quad(lambda x: hermite_psi(k, x) * hermite_psi(l, x), 0, np.inf, epsabs=1e-12)[0]
    assert val == pytest.approx(1.0 if k == l else 0.0, abs=1e-8)


@pytest.mark.parametrize("k", [1, 3, 5])
def test_psi_solves_the_equation(k):
    # -4 psi'' + x**2 psi = gamma psi, derivatives by complex step on the derivative of the recurrence
    x = np.linspace(0.2, 6.0, 30)
    h = 1e-4
    d2 = (hermite_psi(k, x + h) - 2 * hermite_psi(k, x) + hermite_psi(k, x - h)) / h**2
    resid = -4 * d2 + x**2 * hermite_psi(k, x) - oscillator_eigenvalue(k) * hermite_psi(k, x)
    assert np.max(np.abs(resid)) < 1e-5


def test_eigenvalues(solution):
    np.testing.assert_allclose(solution.eigenvalues, [6.0, 14.0, 22.0], atol=1e-3)
    assert np.all(np.diff(solution.eigenvalues) > 0)


def test_eigenvectors(solution):
    V = solution.eigenvectors
    gram = solution.h * V @ V.T
    np.testing.assert_allclose(gram, np.eye(3), atol=1e-8)
    assert np.all(V[:, 0] == 0) and np.all(V[:, -1] == 0)
    assert np.max(np.abs(V[0] - hermite_psi(1, solution.x))) < 1e-4
    for lam, v in zip(solution.eigenvalues, V):
        resid = solution.apply(v) - lam * v[1:-1]
        assert np.max(np.abs(resid)) < 1e-6 * np.max(np.abs(v))


def test_second_order_convergence(solution):
    coarse = solve_sturm_liouville(14.0, 4000, 1)
    ratio = (coarse.eigenvalues[0] - 6.0) / (solution.eigenvalues[0] - 6.0)
    assert ratio == pytest.approx(4.0, abs=0.1)


def test_solver_warnings_and_errors():
    with pytest.warns(UserWarning, match="cutoff"):
        solve_sturm_liouville(6.0, 2000, 1)
    with pytest.warns(UserWarning):
        solve_sturm_liouville(14.0, 500, 1)
    with pytest.raises(DomainError):
        solve_sturm_liouville(14.0, 8000, 7)


def test_quadratic_form_examples():
    psi1 = GridFunction.sample(lambda x: hermite_psi(1, x), X)
    psi3 = GridFunction.sample(lambda x: hermite_psi(3, x), X)
    assert quadratic_form_G(psi1, psi1) == pytest.approx(6.0, abs=1e-4)
    assert quadratic_form_G(psi1, psi3) == pytest.approx(0.0, abs=1e-6)
    assert quadratic_form_G(psi1, psi3) == pytest.approx(quadratic_form_G(psi3, psi1), abs=1e-15)
    with pytest.raises(DomainError):
        quadratic_form_G(psi1, GridFunction.sample(lambda x: hermite_psi(1, x), X[::2]))


def test_rayleigh_bound(rng):
    for _ in range(100):
        y = random_admissible_function(rng, X)
        assert y.y[0] == 0.0
        assert rayleigh_quotient(y) >= 6.0 - 1e-3


def test_j_functional_examples():
    assert j_functional(optimal_candidate()) == pytest.approx(6.0, abs=1e-6)
    assert j_functional(DensityCandidate(optimal_density)) == pytest.approx(6.0, abs=1e-6)
    gamma3 = DensityCandidate(lambda x: 0.5 * x * x * np.exp(-x))
    assert j_functional(gamma3) == pytest.approx(13.0, abs=1e-6)
    assert j_functional(DensityCandidate(lambda x: x * np.exp(-x))) == math.inf


def test_j_matches_g_of_square_root():
    cands = [
        lambda x: 0.5 * x * x * np.exp(-x),
        optimal_density,
        lambda x: x**4 * np.exp(-x * x / 2) / (3 * math.sqrt(math.pi / 2)),
    ]
    x = np.linspace(0.0, 90.0, 400_001)  # sqrt of the gamma density decays only like exp(-x/2)
    for p in cands:
        y = GridFunction(x, np.sqrt(p(x)))
        assert j_functional(DensityCandidate(p)) == pytest.approx(rayleigh_quotient(y), abs=1e-6)


def test_drift_from_optimal_density():
    x = np.linspace(0.1, 5.0, 200)
    np.testing.assert_allclose(drift_from_density(optimal_density, x), 1 / x - x / 2, atol=1e-10)
