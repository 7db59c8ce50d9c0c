"""Half-line oscillator ``-4 y'' + x**2 y = gamma y``, ``y(0) = 0``.

Its eigenfunctions are the odd Hermite functions restricted to ``[0, inf)``
(scaled by ``sqrt 2``) with eigenvalues ``gamma_k = 2 (2k + 1)``, ``k`` odd.
The smallest, 6, is the minimum of ``int 4 y'**2 + x**2 y**2`` over unit-norm
``y`` with ``y(0) = 0``; for a density ``p = y**2`` the same number is the
minimum of ``J(p) = int p'**2 / p + x**2 p``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit
from scipy import integrate
from scipy.linalg import solve_banded

from .errors import DomainError

DEFAULT_CUTOFF = 14.0


def oscillator_eigenvalue(k: int) -> float:
    return 2.0 * (2 * k + 1)


def hermite_psi(k: int, x):
    """Normalised half-line Hermite function ``psi_k``, ``k`` odd.

    ``(2**k k!)**-0.5 (2/pi)**0.25 H_k(x/sqrt 2) exp(-x**2/4)`` with ``H_k``
    from the three-term recurrence.  Accepts real or complex arrays.
    """
    if int(k) != k or k < 1 or k % 2 == 0:
        raise DomainError("psi_k needs an odd k >= 1 (even k violate y(0) = 0)")
    x = np.asarray(x)
    u = x / math.sqrt(2.0)
    h_prev, h = np.ones_like(u), 2.0 * u
    for j in range(1, k):
        h_prev, h = h, 2.0 * u * h - 2.0 * j * h_prev
    log_norm = -0.5 * (k * math.log(2.0) + math.lgamma(k + 1)) + 0.25 * math.log(2.0 / math.pi)
    out = math.exp(log_norm) * h * np.exp(-x * x / 4.0)
    return out if out.ndim else out[()]


@dataclass(frozen=True)
class EigenSolution:
    """Lowest eigenpairs of the finite-difference operator on ``[0, L]``.

    ``x`` holds the ``n + 1`` grid points including both Dirichlet ends;
    ``eigenvectors[j]`` is zero at both ends and has ``h * sum(v**2) = 1``.
    """

    L: float
    n: int
    x: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def h(self) -> float:
        return self.L / self.n

    def apply(self, v):
        """Discrete operator applied to the interior of a grid function."""
        v = np.asarray(v, dtype=float)
        c = 4.0 / self.h**2
        return -c * (v[2:] - 2.0 * v[1:-1] + v[:-2]) + self.x[1:-1] ** 2 * v[1:-1]


@njit(cache=True)
def _count_below(diag, off, lam):
    # Sturm sequence count: negative pivots of LDL' of (A - lam I)
    count = 0
    d = diag[0] - lam
    if d < 0.0:
        count += 1
    for i in range(1, diag.size):
        if d == 0.0:
            d = 1e-300
        d = diag[i] - lam - off * off / d
        if d < 0.0:
            count += 1
    return count


@njit(cache=True)
def _bisect(diag, off, index, lo, hi):
    # smallest lam with more than `index` eigenvalues below it
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _count_below(diag, off, mid) > index:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def solve_sturm_liouville(L: float = DEFAULT_CUTOFF, n: int = 8000, m: int = 3) -> EigenSolution:
    """Lowest ``m`` eigenpairs of ``-4 y'' + x**2 y`` with Dirichlet ends on ``[0, L]``.

    Central differences on ``n`` uniform cells; eigenvalues by Sturm bisection
    of the symmetric tridiagonal matrix, eigenvectors by inverse iteration.
    """
    if m < 1 or m > 6:
        raise DomainError("m must be between 1 and 6")
    if n < 10:
        raise DomainError("n too small for a meaningful discretisation")
    if L < 10:
        warnings.warn(f"cutoff L = {L} is below 10; eigenfunction tails are truncated", stacklevel=2)
    if n < 1000:
        warnings.warn(f"n = {n} < 1000; eigenvalues are accurate only to O(h^2)", stacklevel=2)
    h = L / n
    x = np.linspace(0.0, L, n + 1)
    xi = x[1:-1]
    c = 4.0 / h**2
    diag = 2.0 * c + xi**2
    off = -c
    lo, hi = diag.min() - 2.0 * c, diag.max() + 2.0 * c

    values = np.array([_bisect(diag, off, j, lo, hi) for j in range(m)])

    rng = np.random.default_rng(0)
    ab = np.zeros((3, xi.size))
    ab[0, 1:] = off
    ab[2, :-1] = off
    vectors = np.zeros((m, n + 1))
    for j, lam in enumerate(values):
        ab[1] = diag - lam * (1.0 + 1e-14) - 1e-14
        v = rng.standard_normal(xi.size)
        for _ in range(3):
            v = solve_banded((1, 1), ab, v, check_finite=False)
            for prev in vectors[:j, 1:-1]:
                v -= (v @ prev) * h * prev
            v /= math.sqrt(h * (v @ v))
        first = v[np.flatnonzero(np.abs(v) > 1e-300)[0]]
        vectors[j, 1:-1] = v if first > 0 else -v

    tail = np.abs(vectors[:, -max(2, n // 200) : -1]).max()
    if tail > 1e-6:
        warnings.warn(f"eigenfunction tail {tail:.2e} at the cutoff exceeds 1e-6; increase L", stacklevel=2)
    return EigenSolution(float(L), int(n), x, values, vectors)


@dataclass(frozen=True)
class GridFunction:
    x: np.ndarray
    y: np.ndarray

    @classmethod
    def sample(cls, f, x) -> "GridFunction":
        x = np.asarray(x, dtype=float)
        return cls(x, np.asarray(f(x), dtype=float))

    def norm2(self) -> float:
        return float(integrate.trapezoid(self.y**2, self.x))


def quadratic_form_G(y: GridFunction, z: GridFunction) -> float:
    """``int 4 y' z' + x**2 y z`` by the trapezoid rule on the common grid."""
    if y.x.shape != z.x.shape or not np.array_equal(y.x, z.x):
        raise DomainError("grid functions live on different grids")
    x = y.x
    dy = np.gradient(y.y, x, edge_order=2)
    dz = np.gradient(z.y, x, edge_order=2)
    return float(integrate.trapezoid(4.0 * dy * dz + x * x * y.y * z.y, x))


def rayleigh_quotient(y: GridFunction) -> float:
    return quadratic_form_G(y, y) / y.norm2()


def random_admissible_function(rng: np.random.Generator, x) -> GridFunction:
    """``x * poly(x) * exp(-a x**2)`` with random cubic and ``a`` in ``[0.15, 1]``.

    Vanishes at 0 and is below 1e-8 at the default cutoff.
    """
    x = np.asarray(x, dtype=float)
    coef = rng.normal(size=4)
    a = rng.uniform(0.15, 1.0)
    return GridFunction(x, x * np.polyval(coef, x) * np.exp(-a * x * x))


@dataclass(frozen=True)
class DensityCandidate:
    """Density on ``[0, inf)`` with ``p(0) = 0``; ``derivative`` is optional."""

    pdf: Callable
    derivative: Callable | None = None
    name: str = ""


_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def optimal_density(x):
    """``sqrt(2/pi) x**2 exp(-x**2/2)``, the square of ``psi_1``."""
    x = np.asarray(x)
    return _SQRT_2_OVER_PI * x * x * np.exp(-0.5 * x * x)


def optimal_candidate() -> DensityCandidate:
    return DensityCandidate(
        optimal_density,
        lambda x: _SQRT_2_OVER_PI * (2.0 * x - x**3) * np.exp(-0.5 * x * x),
        "optimal",
    )


def _numeric_derivative(p, x, step=1e-5):
    if x >= step:
        return (p(x + step) - p(x - step)) / (2.0 * step)
    return (-3.0 * p(x) + 4.0 * p(x + step) - p(x + 2.0 * step)) / (2.0 * step)


def j_functional(p: DensityCandidate) -> float:
    """``J(p) = int_0^inf p'**2 / p + x**2 p``; ``inf`` when the integral diverges.

    Divergence is probed on ``[eps, inf)`` for ``eps = 1e-2 .. 1e-10``: the
    integral is infinite if the increments per two decades do not shrink or
    any partial value exceeds 1e6.
    """
    pdf = p.pdf
    dp = p.derivative

    def f(x):
        px = float(pdf(x))
        if px <= 0.0:
            return 0.0
        d = float(dp(x)) if dp is not None else _numeric_derivative(lambda s: float(pdf(s)), x)
        return d * d / px + x * x * px

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        tail = integrate.quad(f, 1.0, np.inf, limit=400, epsabs=1e-13, epsrel=1e-12)[0]
        probes = [integrate.quad(f, 10.0**-k, 1.0, limit=400, epsabs=1e-13, epsrel=1e-12)[0]
                  for k in (2, 4, 6, 8, 10)]
        if not math.isfinite(tail) or max(probes) + tail > 1e6:
            return math.inf
        d = np.diff(probes)
        if d[-1] > 1e-6 and np.all(d[1:] >= 0.5 * d[:-1]):
            return math.inf
        head = integrate.quad(f, 0.0, 1.0, limit=400, epsabs=1e-13, epsrel=1e-12)[0]
    return float(head + tail)


def drift_from_density(pdf, x):
    """``(log p)'(x) / 2`` by complex-step differentiation (``pdf`` must accept complex)."""
    x = np.asarray(x, dtype=float)
    step = 1e-30
    return np.imag(np.log(pdf(x + 1j * step))) / step / 2.0
