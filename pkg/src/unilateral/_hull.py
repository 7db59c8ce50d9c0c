"""Compiled kernels for upper concave hulls of sampled paths."""

import numpy as np
from numba import njit


@njit(cache=True)
def upper_hull_indices(t, y):
    """Indices of the vertices of the upper concave hull, left to right.

    Single-pass monotone chain.  Collinear middle points are dropped, so the
    slopes between returned vertices are strictly decreasing.
    """
    n = t.size
    stack = np.empty(n, dtype=np.int64)
    m = 0
    for i in range(n):
        while m >= 2:
            o = stack[m - 2]
            a = stack[m - 1]
            # a is kept only if it lies strictly above the chord o -> i
            cross = (t[a] - t[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (t[i] - t[o])
            if cross >= 0.0:
                m -= 1
            else:
                break
        stack[m] = i
        m += 1
    return stack[:m].copy()


@njit(cache=True)
def _majorant_energy_on_stack(t, y, stack, m, r):
    # first vertex attaining the maximum height
    top = 0
    for k in range(1, m):
        if y[stack[k]] > y[stack[top]]:
            top = k
    if r >= y[stack[top]]:
        return 0.0
    # steepest chord from (0, r) to a hull vertex, latest on ties
    best = -np.inf
    touch = 0
    for k in range(top + 1):
        tk = t[stack[k]]
        if tk > 0.0:
            s = (y[stack[k]] - r) / tk
            if s >= best:
                best = s
                touch = k
    e = best * best * t[stack[touch]]
    for k in range(touch, top):
        dt = t[stack[k + 1]] - t[stack[k]]
        dy = y[stack[k + 1]] - y[stack[k]]
        e += dy * dy / dt
    return e


@njit(cache=True)
def prefix_majorant_energies(t, y, r, cuts):
    """Minimal unilateral energy on ``[0, t[c]]`` for every index ``c`` in ``cuts``.

    The monotone-chain stack after processing knot ``c`` is exactly the hull of
    the prefix ``0..c``, so all horizons are served by one pass.  ``cuts`` must
    be increasing.
    """
    n = t.size
    out = np.empty(cuts.size)
    stack = np.empty(n, dtype=np.int64)
    m = 0
    j = 0
    for i in range(n):
        while m >= 2:
            o = stack[m - 2]
            a = stack[m - 1]
            cross = (t[a] - t[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (t[i] - t[o])
            if cross >= 0.0:
                m -= 1
            else:
                break
        stack[m] = i
        m += 1
        while j < cuts.size and cuts[j] == i:
            out[j] = _majorant_energy_on_stack(t, y, stack, m, r)
            j += 1
    return out
