"""Best-subset maximization of the quadratic form v_S' Gram_S^{-1} v_S.

Given a covariate sample and a cross-moment vector v, every routine here
maximizes ``Q(S) = v_S' Sigma_SS^{-1} v_S`` over index subsets of a fixed
size, where ``Sigma`` is the centered sample covariance of the covariates.
``Q`` is the explained sum of squares of a best-subset regression, so it is
monotone nondecreasing under supersets; branch-and-bound prunes with exactly
that bound. Forward selection maintains the growing subset Cholesky factor
through rank-one updates, which keeps every step O(n p + p k).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb, sqrt

import numpy as np

from ._bbcore import HAVE_NUMBA, bb_search
from .core import Dataset, SINGULAR_PIVOT_RTOL, chol_spd
from .errors import CandidateSetTooLarge, ProblemTooLarge, SingularGram

#: Largest candidate-set size accepted by branch_and_bound.
MAX_BB_CANDIDATES = 40
#: Largest subset count accepted by the exhaustive oracle.
MAX_EXHAUSTIVE_SUBSETS = 10**6
#: Default pre-screening size for the two-step procedure.
DEFAULT_SCREEN_SIZE = 40
#: Columns-cache threshold: below this p the full Gram matrix is materialized.
_FULL_GRAM_MAX_P = 3000


@dataclass(frozen=True)
class SubsetProblem:
    """Covariates, target cross-moment vector, and the subset size."""

    data: Dataset
    target: np.ndarray
    s: int

    def __post_init__(self):
        v = np.asarray(self.target, dtype=np.float64).reshape(-1)
        if v.shape[0] != self.data.p:
            raise ValueError("target length must equal the number of covariates")
        if not np.all(np.isfinite(v)):
            raise ValueError("target must be finite")
        if not 1 <= self.s <= self.data.p:
            raise ValueError(f"s={self.s} outside [1, p={self.data.p}]")
        object.__setattr__(self, "target", v)


@dataclass(frozen=True)
class SubsetSolution:
    """A maximizing subset, its quadratic-form value, and the direction.

    ``alpha`` is the unit-norm coefficient vector (length p, supported on the
    subset) proportional to ``Sigma_SS^{-1} v_S``, i.e. the direction whose
    linear combination attains the value. ``stalled`` marks solutions where
    forward selection hit collinearity before reaching the requested size;
    then ``len(subset) < requested_size`` and the value is the best achieved
    over the attainable candidates.
    """

    subset: tuple[int, ...]
    value: float
    alpha: np.ndarray
    requested_size: int
    stalled: bool = False


class SearchContext:
    """Per-dataset cache shared by repeated searches with different targets.

    Holds the centered covariates and (lazily) the Gram matrix when p is
    small enough to materialize; otherwise Gram columns are formed from the
    data on demand.
    """

    def __init__(self, data: Dataset):
        self.data = data
        self.n = data.n
        self.p = data.p
        self.xc = np.asfortranarray(data.x - data.x.mean(axis=0))
        self.diag = np.einsum("ij,ij->j", self.xc, self.xc) / self.n
        self._gram = None
        if self.p <= _FULL_GRAM_MAX_P:
            self._gram_pending = True
        else:
            self._gram_pending = False
        self.pivot_tol = SINGULAR_PIVOT_RTOL * float(np.max(self.diag)) if self.p else 0.0

    def gram_column(self, j: int) -> np.ndarray:
        if self._gram_pending:
            self._gram = (self.xc.T @ self.xc) / self.n
            self._gram_pending = False
        if self._gram is not None:
            return self._gram[:, j]
        return (self.xc.T @ self.xc[:, j]) / self.n

    def gram_block(self, idx: np.ndarray) -> np.ndarray:
        cols = self.xc[:, idx]
        return (cols.T @ cols) / self.n

    # -- forward selection --------------------------------------------------

    def forward_path(self, v: np.ndarray, d: int):
        """Greedy path of d variables maximizing the quadratic-form gain.

        Returns ``(order, values)`` where ``values[k]`` is Q after k+1 picks.
        Stops early (shorter arrays) if all remaining candidates are
        collinear with the current selection.
        """
        p = self.p
        r = v.astype(np.float64).copy()
        dres = self.diag.copy()
        g = np.empty((d, p))
        order: list[int] = []
        values: list[float] = []
        q = 0.0
        active = np.ones(p, dtype=bool)
        for k in range(d):
            usable = active & (dres > self.pivot_tol)
            if not np.any(usable):
                break
            scores = np.where(usable, r * r / np.where(usable, dres, 1.0), -np.inf)
            j = int(np.argmax(scores))
            sd = sqrt(dres[j])
            t_new = r[j] / sd
            grow = (self.gram_column(j) - g[:k].T @ g[:k, j]) / sd
            g[k] = grow
            q += t_new * t_new
            r -= grow * t_new
            dres -= grow * grow
            active[j] = False
            order.append(j)
            values.append(q)
        return order, values

    # -- single evaluations --------------------------------------------------

    def eval_subset(self, idx: np.ndarray, v: np.ndarray) -> tuple[float, np.ndarray]:
        """Q(S) and the solve Sigma_SS^{-1} v_S for one subset."""
        from scipy.linalg import cho_solve

        a = self.gram_block(idx)
        lower = chol_spd(a, SINGULAR_PIVOT_RTOL)
        coef = cho_solve((lower, True), v[idx])
        return float(v[idx] @ coef), coef

    def solution_for(self, idx, v, requested_size, stalled=False) -> SubsetSolution:
        idx = np.asarray(sorted(int(i) for i in idx), dtype=np.intp)
        value, coef = self.eval_subset(idx, v)
        alpha = np.zeros(self.p)
        norm = np.linalg.norm(coef)
        alpha[idx] = coef / norm if norm > 0 else 1.0 / sqrt(len(idx))
        return SubsetSolution(
            subset=tuple(int(i) for i in idx),
            value=value,
            alpha=alpha,
            requested_size=requested_size,
            stalled=stalled,
        )

    def best_single(self, v: np.ndarray) -> SubsetSolution:
        """Size-one fast path: argmax v_j^2 / Sigma_jj."""
        usable = self.diag > self.pivot_tol
        if not np.any(usable):
            raise SingularGram("all columns are numerically constant")
        scores = np.where(usable, v * v / np.where(usable, self.diag, 1.0), -np.inf)
        j = int(np.argmax(scores))
        return self.solution_for([j], v, 1)

    def verified_prefix(self, order: list[int]) -> list[int]:
        """Drop forward picks whose pivots fail a fresh factorization.

        Incrementally updated residual variances can drift above the stall
        threshold on exactly rank-deficient data; refactoring the selected
        Gram from the data catches those phantom picks. Earlier picks take
        priority: each column is kept only if it is independent of the kept
        columns before it.
        """
        if not order:
            return order
        from scipy.linalg.lapack import dpstrf

        a = self.gram_block(np.asarray(order, dtype=np.intp))
        tol = SINGULAR_PIVOT_RTOL * float(np.max(np.diag(a)))
        _, piv, rank, _ = dpstrf(a, tol=tol, lower=1)
        if rank == len(order):
            return order
        return [order[i] for i in piv[:rank] - 1]


def forward_select(prob: SubsetProblem, d: int) -> list[int]:
    """Greedy stepwise addition; returns the first d picks in selection order.

    Raises :class:`SingularGram` if every remaining candidate is collinear
    with the current selection before d variables have been found.
    """
    if not prob.s <= d <= prob.data.p:
        raise ValueError(f"d={d} outside [s={prob.s}, p={prob.data.p}]")
    ctx = SearchContext(prob.data)
    order, _ = ctx.forward_path(prob.target, d)
    order = ctx.verified_prefix(order)
    if len(order) < d:
        raise SingularGram(
            f"forward selection stalled after {len(order)} of {d} variables"
        )
    return order


def _tie_better(cand: tuple, best: tuple) -> bool:
    return cand < best


class _BBState:
    """Branch-and-bound over subsets of an explicit candidate Gram."""

    __slots__ = ("a", "u", "s", "best_value", "best_subset", "eps", "nodes", "_current_sel")

    def __init__(self, a: np.ndarray, u: np.ndarray, s: int):
        self.a = a
        self.u = u
        self.s = s
        self.best_value = -np.inf
        self.best_subset: tuple[int, ...] | None = None
        self.eps = 0.0
        self.nodes = 0

    def _offer(self, value: float, subset_positions) -> None:
        subset = tuple(sorted(subset_positions))
        if value > self.best_value + self.eps:
            self.best_value = value
            self.best_subset = subset
            self.eps = 1e-12 * max(1.0, abs(value))
        elif (
            value > self.best_value - self.eps
            and self.best_subset is not None
            and _tie_better(subset, self.best_subset)
        ):
            self.best_subset = subset

    def seed_greedy(self) -> None:
        """Greedy incumbent so pruning bites from the first node."""
        m = self.a.shape[0]
        sel = []
        r = self.u.copy()
        d = np.diag(self.a).copy()
        g = np.empty((self.s, m))
        active = np.ones(m, dtype=bool)
        q = 0.0
        for k in range(self.s):
            scores = np.where(active, r * r / np.where(active, d, 1.0), -np.inf)
            j = int(np.argmax(scores))
            sd = sqrt(d[j])
            t_new = r[j] / sd
            grow = (self.a[:, j] - g[:k].T @ g[:k, j]) / sd
            g[k] = grow
            q += t_new * t_new
            r -= grow * t_new
            d -= grow * grow
            active[j] = False
            sel.append(j)
        self._offer(q, sel)

    def span_gain(self, g, r, d, rem) -> float:
        """Total gain from adding every remaining candidate (the span bound)."""
        k0 = g.shape[0]
        m = rem.size
        gl = np.empty((k0 + m, m))
        gl[:k0] = g[:, rem]
        rl = r[rem].copy()
        dl = d[rem].copy()
        gain = 0.0
        asub = self.a[np.ix_(rem, rem)]
        for i in range(m):
            sd = sqrt(max(dl[i], 0.0))
            if sd <= 0.0:
                continue  # unreachable for a nonsingular candidate Gram
            t_new = rl[i] / sd
            gain += t_new * t_new
            if i + 1 < m:
                grow = (asub[i, i + 1 :] - gl[: k0 + i, i + 1 :].T @ gl[: k0 + i, i]) / sd
                gl[k0 + i, i + 1 :] = grow
                rl[i + 1 :] -= grow * t_new
                dl[i + 1 :] -= grow * grow
        return gain

    def search(self, q, g, r, d, rem, bound):
        """DFS with include-first bound inheritance.

        ``rem`` is the ordered remaining candidate positions; ``bound`` is
        Q(selected + rem), valid for this node and its include child.
        """
        self.nodes += 1
        need = self.s - g.shape[0]
        if bound <= self.best_value + self.eps:
            return
        if need == 0:
            self._offer(q, self._current_sel)
            return
        if rem.size < need:
            return
        if rem.size == need:
            # single completion; its value is exactly the node bound
            self._offer(bound, self._current_sel + list(rem))
            return
        if need == 1:
            scores = r[rem] ** 2 / d[rem]
            top = q + float(np.max(scores))
            if top > self.best_value - self.eps:
                for pos in rem[np.argsort(-scores, kind="stable")]:
                    val = q + r[pos] ** 2 / d[pos]
                    if val <= self.best_value - self.eps:
                        break
                    self._offer(val, self._current_sel + [int(pos)])
            return

        j = int(rem[0])
        rest = rem[1:]

        # include j: the parent's bound carries over unchanged
        k = g.shape[0]
        sd = sqrt(d[j])
        t_new = r[j] / sd
        grow = (self.a[:, j] - g.T @ g[:, j]) / sd
        g2 = np.vstack([g, grow[None, :]])
        r2 = r - grow * t_new
        d2 = d - grow * grow
        self._current_sel.append(j)
        self.search(q + t_new * t_new, g2, r2, d2, rest, bound)
        self._current_sel.pop()

        # exclude j: recompute the span bound without it
        ex_bound = q + self.span_gain(g, r, d, rest)
        self.search(q, g, r, d, rest, ex_bound)

    def run(self, order: np.ndarray):
        self._current_sel: list[int] = []
        self.seed_greedy()
        m = self.a.shape[0]
        g0 = np.empty((0, m))
        r0 = self.u.copy()
        d0 = np.diag(self.a).copy()
        full_bound = self.span_gain(g0, r0, d0, order)
        self.search(0.0, g0, r0, d0, order, full_bound)
        return self.best_subset, self.best_value


def branch_and_bound(prob: SubsetProblem, candidates) -> SubsetSolution:
    """Exact best size-s subset of the given candidates.

    The bound exploits monotonicity of the quadratic form under supersets:
    the value on ``selected + remaining`` upper-bounds every completion.
    Candidates are explored in decreasing marginal-value order.
    """
    cand = np.asarray(sorted(set(int(c) for c in candidates)), dtype=np.intp)
    m = cand.size
    if m > MAX_BB_CANDIDATES:
        raise CandidateSetTooLarge(
            f"{m} candidates exceed the branch-and-bound guard of {MAX_BB_CANDIDATES}"
        )
    if m < prob.s:
        raise ValueError(f"need at least s={prob.s} candidates, got {m}")
    ctx = SearchContext(prob.data)
    return _branch_and_bound_ctx(ctx, prob.target, prob.s, cand)


def _branch_and_bound_ctx(ctx: SearchContext, v, s, cand: np.ndarray) -> SubsetSolution:
    from scipy.linalg.lapack import dpstrf

    a = ctx.gram_block(cand)
    tol = SINGULAR_PIVOT_RTOL * float(np.max(np.diag(a)))
    _, _, rank, _ = dpstrf(a, tol=tol, lower=1)
    if rank < cand.size:
        raise SingularGram(
            f"candidate Gram has numerical rank {rank} < {cand.size} (collinear candidates)"
        )
    u = v[cand]
    marginal = u * u / np.diag(a)
    order = np.argsort(-marginal, kind="stable").astype(np.int64)
    if HAVE_NUMBA:
        a2 = np.ascontiguousarray(a[np.ix_(order, order)])
        u2 = np.ascontiguousarray(u[order])
        span_tol = 1e-14 * float(np.max(np.diag(a)))
        _, mask, _ = bb_search(a2, u2, s, order, span_tol)
        positions = [i for i in range(cand.size) if (int(mask) >> i) & 1]
    else:
        state = _BBState(a, u, s)
        best_local, _ = state.run(order.astype(np.intp))
        positions = list(best_local)
    subset = cand[positions]
    return ctx.solution_for(subset, v, s)


def two_step(prob: SubsetProblem, screen_size: int | None = None) -> SubsetSolution:
    """Forward screening followed by exact branch-and-bound on the survivors.

    ``screen_size`` defaults to min(40, p). For s > 40 the combinatorial
    stage is skipped and the pure forward-selection solution is returned. If
    screening stalls on collinearity before reaching s candidates, the best
    achievable (smaller) subset is returned with ``stalled=True``.
    """
    if screen_size is None:
        screen_size = min(DEFAULT_SCREEN_SIZE, prob.data.p)
    if not prob.s <= screen_size <= prob.data.p:
        raise ValueError(
            f"screen_size={screen_size} outside [s={prob.s}, p={prob.data.p}]"
        )
    ctx = SearchContext(prob.data)
    return _two_step_ctx(ctx, prob.target, prob.s, screen_size)


def _two_step_ctx(ctx, v, s, screen_size) -> SubsetSolution:
    if s == 1:
        return ctx.best_single(v)
    if s > MAX_BB_CANDIDATES:
        order, _ = ctx.forward_path(v, s)
        order = ctx.verified_prefix(order)
        if len(order) < s:
            return ctx.solution_for(order, v, s, stalled=True)
        return ctx.solution_for(order, v, s)
    order, _ = ctx.forward_path(v, screen_size)
    order = ctx.verified_prefix(order)
    if len(order) < s:
        return ctx.solution_for(order, v, s, stalled=True)
    if len(order) == s:
        return ctx.solution_for(order, v, s)
    cand = np.asarray(sorted(order), dtype=np.intp)
    return _branch_and_bound_ctx(ctx, v, s, cand)


def _forward_ctx(ctx, v, s) -> SubsetSolution:
    """Pure greedy solution: the forward path truncated at s picks."""
    if s == 1:
        return ctx.best_single(v)
    order, _ = ctx.forward_path(v, s)
    order = ctx.verified_prefix(order)
    return ctx.solution_for(order, v, s, stalled=len(order) < s)


def forward_solution(prob: SubsetProblem) -> SubsetSolution:
    """Greedy-only solution of the subset problem (no combinatorial stage).

    This is the search the two-step procedure degrades to for s > 40,
    exposed directly so large repeated searches (bootstrap replicates) can
    trade exactness for speed explicitly.
    """
    ctx = SearchContext(prob.data)
    return _forward_ctx(ctx, prob.target, prob.s)


def exhaustive(prob: SubsetProblem) -> SubsetSolution:
    """Global maximizer by full enumeration (testing oracle).

    Ties break to the lexicographically smallest subset; subsets with a
    singular Gram are skipped. Guarded by the total subset count.
    """
    p, s = prob.data.p, prob.s
    total = comb(p, s)
    if total > MAX_EXHAUSTIVE_SUBSETS:
        raise ProblemTooLarge(f"C({p},{s}) = {total} exceeds {MAX_EXHAUSTIVE_SUBSETS}")
    ctx = SearchContext(prob.data)
    v = prob.target
    best_val = -np.inf
    best_idx = None
    skipped = 0
    for idx in combinations(range(p), s):
        arr = np.asarray(idx, dtype=np.intp)
        try:
            val, _ = ctx.eval_subset(arr, v)
        except SingularGram:
            skipped += 1
            continue
        if val > best_val:
            best_val = val
            best_idx = arr
    if best_idx is None:
        raise SingularGram(f"all {total} subsets of size {s} are collinear")
    return ctx.solution_for(best_idx, v, s)
