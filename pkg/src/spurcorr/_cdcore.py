"""Compiled cyclic coordinate descent for weighted-l1 penalized least squares."""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap if not (args and callable(args[0])) else args[0]


@njit(cache=True)
def _kkt_satisfied(xs, resid, w, beta, kkt_tol):
    n, p = xs.shape
    for j in range(p):
        acc = 0.0
        for i in range(n):
            acc += xs[i, j] * resid[i]
        grad = acc / n
        if beta[j] == 0.0:
            if abs(grad) > w[j] + kkt_tol:
                return False
        else:
            sign = 1.0 if beta[j] > 0.0 else -1.0
            if abs(grad - w[j] * sign) > kkt_tol:
                return False
    return True


@njit(cache=True)
def _update_coord(xs, resid, beta, w, n, j):
    """One soft-threshold step; returns |change|."""
    bj = beta[j]
    acc = 0.0
    for i in range(n):
        acc += xs[i, j] * resid[i]
    rho = acc / n + bj
    wj = w[j]
    if rho > wj:
        nb = rho - wj
    elif rho < -wj:
        nb = rho + wj
    else:
        nb = 0.0
    if nb != bj:
        diff = nb - bj
        for i in range(n):
            resid[i] -= xs[i, j] * diff
        beta[j] = nb
        return diff if diff >= 0.0 else -diff
    return 0.0


@njit(cache=True)
def _escape_tol(sweeps_done: float) -> float:
    if sweeps_done >= 2500.0:
        return 9e-7
    if sweeps_done >= 500.0:
        return 3e-7
    return 1e-7


@njit(cache=True)
def cd_weighted_l1(xs, yc, w, beta0, max_sweeps, tol):
    """Minimize (2n)^-1 ||yc - xs b||^2 + sum_j w_j |b_j| over b.

    ``xs`` columns must have zero mean and unit 1/n-variance (constant
    columns encoded as all-zero), so each coordinate subproblem is an exact
    soft-threshold step. Iterates with the active-set strategy: cycle the
    currently nonzero coordinates to convergence, then one full sweep to
    admit violators. Returns (beta, sweeps_used, converged) with sweeps
    counted in full-dimension equivalents.

    Convergence is max absolute coefficient change below ``tol`` within a
    (full) sweep. Strongly collinear designs have non-unique solutions along
    which coefficient changes decay arbitrarily slowly while the iterate is
    already stationary, so stalled runs periodically check the subgradient
    conditions and accept those as convergence too; that check starts at
    1e-7 and relaxes to at most 9e-7 after 2500 sweeps, always inside the
    1e-6 guarantee stated for the fitted result.
    """
    n, p = xs.shape
    beta = beta0.copy()
    resid = yc.copy()
    for j in range(p):
        if beta[j] != 0.0:
            for i in range(n):
                resid[i] -= xs[i, j] * beta[j]
    act = np.empty(p, dtype=np.int64)
    updates = 0.0
    limit = float(max_sweeps) * p
    outer = 0
    while updates < limit:
        # full pass over every coordinate
        delta = 0.0
        for j in range(p):
            ad = _update_coord(xs, resid, beta, w, n, j)
            if ad > delta:
                delta = ad
        updates += p
        outer += 1
        if delta < tol:
            return beta, int(updates / p), True
        if outer % 10 == 0:
            updates += p
            if _kkt_satisfied(xs, resid, w, beta, _escape_tol(updates / p)):
                return beta, int(updates / p), True
        # inner passes over the active set only
        m = 0
        for j in range(p):
            if beta[j] != 0.0:
                act[m] = j
                m += 1
        if m == 0:
            continue
        inner = 0
        while updates < limit:
            delta = 0.0
            for k in range(m):
                ad = _update_coord(xs, resid, beta, w, n, act[k])
                if ad > delta:
                    delta = ad
            updates += m
            inner += 1
            if delta < tol:
                break
            if inner % 50 == 0:
                updates += p  # the check costs one full gradient pass
                if _kkt_satisfied(xs, resid, w, beta, _escape_tol(updates / p)):
                    return beta, int(updates / p), True
    return beta, int(updates / p), False
