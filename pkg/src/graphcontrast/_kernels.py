"""Hot inner loops: restart walks and the cyclic Jacobi eigensolver.

Both kernels are written in plain scalar numpy code so they run unchanged
with or without numba. When numba is importable they are JIT-compiled
(without fastmath, so floating-point results stay reproducible across
calls); otherwise the pure Python versions are used, which are slower but
produce the same output for the same inputs.

Randomness is injected as pre-drawn uniform arrays, so the kernels
themselves are pure functions.
"""

from __future__ import annotations

import numpy as np

try:  # pragma: no cover - exercised implicitly by every caller
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


@njit(cache=True)
def rwr_walk(offsets, neighbors, start, restart_prob, max_set_size, coins, moves):
    """Random walk with restart; returns the set of visited vertices.

    coins/moves are uniform [0,1) draws, one pair per potential step. The
    walk restarts to ``start`` when the coin falls below ``restart_prob``
    or the current vertex has no neighbors, and stops as soon as the
    visited set reaches ``max_set_size`` or the draws are exhausted.
    """
    visited = np.empty(max_set_size, dtype=np.int64)
    visited[0] = start
    count = 1
    cur = start
    for t in range(len(coins)):
        if count >= max_set_size:
            break
        deg = offsets[cur + 1] - offsets[cur]
        if deg == 0 or coins[t] < restart_prob:
            cur = start
        else:
            cur = neighbors[offsets[cur] + np.int64(moves[t] * deg)]
        found = False
        for i in range(count):
            if visited[i] == cur:
                found = True
                break
        if not found:
            visited[count] = cur
            count += 1
    return visited[:count]


@njit(cache=True)
def jacobi_sweeps(a, max_sweeps, tol):
    """Cyclic Jacobi rotations on a symmetric matrix, in place.

    Returns (eigenvalues_unsorted, eigenvectors_as_columns, sweeps_used).
    sweeps_used is -1 if the off-diagonal Frobenius norm never fell below
    ``tol`` within ``max_sweeps`` sweeps.
    """
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return np.array([a[0, 0]]), v, 0
    used = -1
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                off += 2.0 * a[i, j] * a[i, j]
        if np.sqrt(off) < tol:
            used = sweep
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                # stable rotation angle (classic two-sided Jacobi)
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                app = a[p, p]
                aqq = a[q, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    if k != p and k != q:
                        akp = a[k, p]
                        akq = a[k, q]
                        a[k, p] = c * akp - s * akq
                        a[p, k] = a[k, p]
                        a[k, q] = s * akp + c * akq
                        a[q, k] = a[k, q]
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    vals = np.empty(n)
    for i in range(n):
        vals[i] = a[i, i]
    return vals, v, used


def warm_up() -> None:
    """Trigger JIT compilation so later calls run at full speed."""
    offsets = np.array([0, 1, 2], dtype=np.int64)
    neighbors = np.array([1, 0], dtype=np.int64)
    rwr_walk(offsets, neighbors, 0, 0.5, 2, np.array([0.9, 0.1]), np.array([0.3, 0.3]))
    jacobi_sweeps(np.array([[2.0, 1.0], [1.0, 2.0]]), 50, 1e-12)
