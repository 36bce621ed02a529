"""Numba kernels for penalized least-squares coordinate descent.

Columns are assumed centered; ``v[j] = x_j'x_j / n`` (1 for standardized data).
All kernels update ``beta`` and ``r`` in place, with ``r = y - X beta``.
"""

import numpy as np
from numba import njit

LASSO = 0
MCP = 1
ENET = 2


@njit(cache=True, inline="always")
def _soft(z, t):
    # relative dead zone so lambda_max computed by BLAS still gives the empty model
    t = t * (1.0 + 1e-12)
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True)
def update(z, v, lam, family, gamma, alpha):
    """Minimize ``v/2 b^2 - z b + pen(b)`` over b (z is the partial-residual product)."""
    if family == LASSO:
        return _soft(z, lam) / v
    if family == MCP:
        if abs(z) <= gamma * lam * v:
            return _soft(z, lam) / (v - 1.0 / gamma)
        return z / v
    return _soft(z, lam * alpha) / (v + lam * (1.0 - alpha))


@njit(cache=True, inline="always")
def _step(X, v, r, beta, j, lam, family, gamma, alpha, n):
    xj = X[:, j]
    z = 0.0
    for i in range(n):
        z += xj[i] * r[i]
    z = z / n + v[j] * beta[j]
    b = update(z, v[j], lam, family, gamma, alpha)
    d = b - beta[j]
    if d != 0.0:
        for i in range(n):
            r[i] -= d * xj[i]
        beta[j] = b
    return abs(d)


@njit(cache=True, nogil=True)
def solve(X, v, r, beta, lam, family, gamma, alpha, tol, max_iter):
    """Active-set cyclic coordinate descent at a single lambda.

    A full sweep finds the active set; the active set is then iterated to
    convergence, and the cycle repeats until a full sweep changes nothing
    by more than ``tol``. Returns ``(sweeps, converged)``.
    """
    n, p = X.shape
    active = np.zeros(p, dtype=np.bool_)
    idx = np.empty(p, dtype=np.int64)
    sweeps = 0
    while sweeps < max_iter:
        # full sweep
        sweeps += 1
        dmax = 0.0
        new_active = False
        for j in range(p):
            d = _step(X, v, r, beta, j, lam, family, gamma, alpha, n)
            if d > dmax:
                dmax = d
            if beta[j] != 0.0 and not active[j]:
                active[j] = True
                new_active = True
        if dmax < tol and not new_active:
            return sweeps, True
        m = 0
        for j in range(p):
            if active[j]:
                idx[m] = j
                m += 1
        # active-set iterations
        while sweeps < max_iter:
            sweeps += 1
            dmax = 0.0
            for k in range(m):
                d = _step(X, v, r, beta, idx[k], lam, family, gamma, alpha, n)
                if d > dmax:
                    dmax = d
            if dmax < tol:
                break
    return sweeps, False


@njit(cache=True, nogil=True)
def solve_path(X, v, y, lambdas, family, gamma, alpha, tol, max_iter, beta0):
    """Warm-started path over a decreasing grid; returns (B, R, sweeps, converged)."""
    n, p = X.shape
    L = lambdas.shape[0]
    B = np.zeros((p, L))
    R = np.zeros((n, L))
    sweeps = np.zeros(L, dtype=np.int64)
    conv = np.zeros(L, dtype=np.bool_)
    beta = beta0.copy()
    r = y - X @ beta
    for k in range(L):
        s, c = solve(X, v, r, beta, lambdas[k], family, gamma, alpha, tol, max_iter)
        sweeps[k] = s
        conv[k] = c
        B[:, k] = beta
        R[:, k] = r
    return B, R, sweeps, conv


@njit(cache=True, nogil=True)
def perm_path_counts(X, v, y, lambdas, family, gamma, alpha, tol, max_iter):
    """Selected-set size at each lambda of a warm-started path (no storage)."""
    n, p = X.shape
    L = lambdas.shape[0]
    counts = np.zeros(L, dtype=np.int64)
    beta = np.zeros(p)
    r = y.copy()
    for k in range(L):
        solve(X, v, r, beta, lambdas[k], family, gamma, alpha, tol, max_iter)
        c = 0
        for j in range(p):
            if beta[j] != 0.0:
                c += 1
        counts[k] = c
    return counts


@njit(cache=True, nogil=True)
def perm_resid_counts(X, v, resid, lambdas, family, gamma, alpha, tol, max_iter, warm):
    """Selected counts when refitting ``resid[:, k]`` (already permuted) at ``lambdas[k]``.

    With ``warm`` each refit starts from the previous lambda's solution,
    otherwise from zero.
    """
    n, p = X.shape
    L = lambdas.shape[0]
    counts = np.zeros(L, dtype=np.int64)
    beta = np.zeros(p)
    r = np.empty(n)
    for k in range(L):
        yk = resid[:, k]
        if not warm:
            beta[:] = 0.0
        for i in range(n):
            r[i] = yk[i]
        for j in range(p):
            if beta[j] != 0.0:
                bj = beta[j]
                for i in range(n):
                    r[i] -= bj * X[i, j]
        solve(X, v, r, beta, lambdas[k], family, gamma, alpha, tol, max_iter)
        c = 0
        for j in range(p):
            if beta[j] != 0.0:
                c += 1
        counts[k] = c
    return counts
