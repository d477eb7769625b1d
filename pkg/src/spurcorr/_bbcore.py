"""Compiled branch-and-bound kernel for the best-subset quadratic form.

The search tree splits on include/exclude of one candidate at a time, in a
fixed traversal order, so the remaining pool is always a suffix of that
order. States along the include path are stored per include-depth; LIFO
processing keeps each level valid for exactly the frames that need it.
Subsets are reported as bitmasks over candidate positions (candidates are
sorted, so bit order is index order).
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap if not (args and callable(args[0])) else args[0]


@njit(cache=True)
def _lex_smaller(mask_a: np.int64, mask_b: np.int64) -> bool:
    """True if mask_a's sorted index tuple precedes mask_b's."""
    diff = mask_a ^ mask_b
    if diff == 0:
        return False
    low = diff & (-diff)
    return (mask_a & low) != 0


@njit(cache=True)
def _span_gain(a, big_g, k, r_lev, d_lev, pos, gs, rl, dl, span_tol):
    """Gain in Q from adding every candidate at positions >= pos.

    ``big_g`` holds the include-path rows (0..k-1); ``r_lev``/``d_lev`` are
    the level-k partial covariances/variances. Scratch arrays ``gs``,
    ``rl``, ``dl`` are caller-allocated. Candidates whose partial variance
    falls below ``span_tol`` contribute nothing (dependent direction).
    """
    m = a.shape[0]
    cnt = m - pos
    for j in range(cnt):
        rl[j] = r_lev[pos + j]
        dl[j] = d_lev[pos + j]
    gain = 0.0
    for i in range(cnt):
        if dl[i] <= span_tol:
            for j in range(i + 1, cnt):
                gs[i, j] = 0.0
            continue
        sd = np.sqrt(dl[i])
        t = rl[i] / sd
        gain += t * t
        ci = pos + i
        for j in range(i + 1, cnt):
            cj = pos + j
            acc = a[ci, cj]
            for kk in range(k):
                acc -= big_g[kk, ci] * big_g[kk, cj]
            for ii in range(i):
                acc -= gs[ii, i] * gs[ii, j]
            val = acc / sd
            gs[i, j] = val
            rl[j] -= val * t
            dl[j] -= val * val
    return gain


@njit(cache=True)
def bb_search(a, u, s, ord2orig, span_tol):
    """Exact argmax of v_S' A_SS^{-1} v_S over |S| = s within the candidates.

    ``a``/``u`` must already be permuted into the traversal order;
    ``ord2orig`` maps traversal positions back to sorted-candidate positions,
    and the returned mask is over the latter (so lexicographic tie-breaking
    compares index sets, not traversal order). Also returns the node count.
    """
    m = a.shape[0]
    # level states along the include path
    lev_r = np.empty((s + 1, m))
    lev_d = np.empty((s + 1, m))
    big_g = np.empty((s, m))
    cur_sel = np.empty(s, dtype=np.int64)
    for j in range(m):
        lev_r[0, j] = u[j]
        lev_d[0, j] = a[j, j]

    # scratch for span bounds
    gs = np.empty((m, m))
    rl = np.empty(m)
    dl = np.empty(m)

    # greedy incumbent
    rg = u.copy()
    dg = np.empty(m)
    gg = np.empty((s, m))
    act = np.ones(m, dtype=np.uint8)
    for j in range(m):
        dg[j] = a[j, j]
    best = 0.0
    best_mask = np.int64(0)
    for k in range(s):
        pick = -1
        pick_score = -1.0
        for j in range(m):
            if act[j] == 1 and dg[j] > span_tol:
                sc = rg[j] * rg[j] / dg[j]
                if sc > pick_score:
                    pick_score = sc
                    pick = j
        if pick < 0:
            break
        sd = np.sqrt(dg[pick])
        t = rg[pick] / sd
        best += t * t
        for j in range(m):
            acc = a[pick, j]
            for kk in range(k):
                acc -= gg[kk, pick] * gg[kk, j]
            gg[k, j] = acc / sd
        for j in range(m):
            rg[j] -= gg[k, j] * t
            dg[j] -= gg[k, j] * gg[k, j]
        act[pick] = 0
        best_mask |= np.int64(1) << ord2orig[pick]
    eps = 1e-12 * (abs(best) if abs(best) > 1.0 else 1.0)

    # DFS stack: (pos, k, q, bound, pending-include flag)
    cap = 2 * m + 4
    st_pos = np.empty(cap, dtype=np.int64)
    st_k = np.empty(cap, dtype=np.int64)
    st_q = np.empty(cap)
    st_bound = np.empty(cap)
    st_inc = np.empty(cap, dtype=np.uint8)

    root_bound = _span_gain(a, big_g, 0, lev_r[0], lev_d[0], 0, gs, rl, dl, span_tol)
    top = 0
    st_pos[top] = 0
    st_k[top] = 0
    st_q[top] = 0.0
    st_bound[top] = root_bound
    st_inc[top] = 0
    top += 1
    nodes = 0

    while top > 0:
        top -= 1
        pos = st_pos[top]
        k = st_k[top]
        q = st_q[top]
        bound = st_bound[top]
        nodes += 1

        if st_inc[top] == 1:
            # materialize the include of candidate pos-1 into level k
            kk = k - 1
            c = pos - 1
            sd = np.sqrt(lev_d[kk, c])
            t = lev_r[kk, c] / sd
            for j in range(m):
                acc = a[c, j]
                for ii in range(kk):
                    acc -= big_g[ii, c] * big_g[ii, j]
                big_g[kk, j] = acc / sd
            for j in range(m):
                lev_r[k, j] = lev_r[kk, j] - big_g[kk, j] * t
                lev_d[k, j] = lev_d[kk, j] - big_g[kk, j] * big_g[kk, j]
            cur_sel[kk] = c

        if bound <= best + eps:
            continue
        need = s - k
        if need == 0:
            mask = np.int64(0)
            for i in range(k):
                mask |= np.int64(1) << ord2orig[cur_sel[i]]
            if q > best + eps:
                best = q
                best_mask = mask
                eps = 1e-12 * (abs(best) if abs(best) > 1.0 else 1.0)
            elif q >= best - eps and _lex_smaller(mask, best_mask):
                best_mask = mask
            continue
        rem = m - pos
        if rem < need:
            continue
        if rem == need:
            val = q + _span_gain(a, big_g, k, lev_r[k], lev_d[k], pos, gs, rl, dl, span_tol)
            mask = np.int64(0)
            for i in range(k):
                mask |= np.int64(1) << ord2orig[cur_sel[i]]
            for j in range(pos, m):
                mask |= np.int64(1) << ord2orig[j]
            if val > best + eps:
                best = val
                best_mask = mask
                eps = 1e-12 * (abs(best) if abs(best) > 1.0 else 1.0)
            elif val >= best - eps and _lex_smaller(mask, best_mask):
                best_mask = mask
            continue
        if need == 1:
            base = np.int64(0)
            for i in range(k):
                base |= np.int64(1) << ord2orig[cur_sel[i]]
            for j in range(pos, m):
                if lev_d[k, j] <= span_tol:
                    continue
                val = q + lev_r[k, j] * lev_r[k, j] / lev_d[k, j]
                if val > best + eps:
                    best = val
                    best_mask = base | (np.int64(1) << ord2orig[j])
                    eps = 1e-12 * (abs(best) if abs(best) > 1.0 else 1.0)
                elif val >= best - eps:
                    mask = base | (np.int64(1) << ord2orig[j])
                    if _lex_smaller(mask, best_mask):
                        best_mask = mask
            continue

        ex_bound = q + _span_gain(
            a, big_g, k, lev_r[k], lev_d[k], pos + 1, gs, rl, dl, span_tol
        )
        if lev_d[k, pos] > span_tol:
            inc_q = q + lev_r[k, pos] * lev_r[k, pos] / lev_d[k, pos]
        else:
            inc_q = q  # dependent candidate: including it cannot help
        # exclude child first so the include child is popped (expanded) first
        st_pos[top] = pos + 1
        st_k[top] = k
        st_q[top] = q
        st_bound[top] = ex_bound
        st_inc[top] = 0
        top += 1
        if lev_d[k, pos] > span_tol:
            st_pos[top] = pos + 1
            st_k[top] = k + 1
            st_q[top] = inc_q
            st_bound[top] = bound
            st_inc[top] = 1
            top += 1
    return best, best_mask, nodes
