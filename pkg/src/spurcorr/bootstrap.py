"""Multiplier (wild) bootstrap for the null law of the maximum spurious correlation.

Each replicate perturbs the centered covariate rows by i.i.d. standard normal
multipliers, forms ``z = n^{-1/2} sum_i xi_i (X_i - mean)``, and maximizes the
same subset quadratic form as the observed statistic, so null and observed
values share the search's approximation bias. The corrected variant rescales
by ``sqrt(n) / |xi|_2``, which pins the per-sqrt(n) value inside [0, 1].
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import sqrt

import numpy as np
from scipy.linalg import cho_solve

from .core import Dataset, RngStream, chol_spd
from .errors import DegenerateResponse, EmptySelection, SingularGram
from .subset_search import DEFAULT_SCREEN_SIZE, SearchContext
from .spurious import _solve_ctx

#: Coordinates whose residualized variance falls below this are dropped.
DEGENERATE_COORD_TOL = 1e-14


@dataclass(frozen=True)
class BootstrapDistribution:
    """Sorted replicate values of one bootstrap statistic.

    ``statistic`` is ``mb`` (plain multiplier), ``cmb`` (corrected) or
    ``lla_mb`` (residualized max-abs process); ``scale`` records whether
    values are on the raw sqrt(n) scale or divided by sqrt(n) (the
    correlation scale).
    """

    values: np.ndarray
    reps: int
    seed: dict
    statistic: str
    scale: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.reps,):
            raise ValueError("values length must equal reps")
        if np.any(np.diff(vals) < 0):
            raise ValueError("values must be sorted ascending")
        if vals.size and vals[0] < 0:
            raise ValueError("bootstrap values must be nonnegative")
        if self.statistic == "cmb" and self.scale == "per_sqrt_n":
            if vals.size and vals[-1] > 1.0 + 1e-12:
                raise ValueError("corrected per-sqrt(n) values must lie in [0, 1]")
        object.__setattr__(self, "values", vals)

    def upper_quantile(self, alpha: float) -> float:
        return quantile(self, alpha)

    def p_value(self, statistic: float) -> float:
        """Positively-biased Monte Carlo p-value (1 + #{values >= stat}) / (reps + 1)."""
        exceed = int(np.sum(self.values >= statistic))
        return (1 + exceed) / (self.reps + 1)


def quantile(b: BootstrapDistribution, alpha: float) -> float:
    """Empirical upper-alpha quantile: the ceil((1-alpha)*reps) order statistic."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    k = int(np.ceil((1.0 - alpha) * b.reps))
    k = min(max(k, 1), b.reps)
    return float(b.values[k - 1])


def _replicate_ctx(ctx: SearchContext, s, rng, corrected, method, screen_size, xi=None):
    if xi is None:
        xi = rng.generator().standard_normal(ctx.n)
    else:
        xi = np.asarray(xi, dtype=np.float64).reshape(-1)
        if xi.shape[0] != ctx.n:
            raise ValueError("xi length must equal n")
    z = (xi @ ctx.xc) / sqrt(ctx.n)
    sol = _solve_ctx(ctx, z, s, method, screen_size)
    value = sqrt(max(sol.value, 0.0))
    if corrected:
        value *= sqrt(ctx.n) / float(np.linalg.norm(xi))
    return value


def multiplier_replicate(
    d: Dataset,
    s: int,
    rng: RngStream,
    corrected: bool = True,
    method: str = "two_step",
    screen_size: int = DEFAULT_SCREEN_SIZE,
    xi: np.ndarray | None = None,
) -> float:
    """One bootstrap replicate on the raw sqrt(n) scale.

    ``xi`` overrides the multiplier draw (testing hook).
    """
    if d.n < s + 2:
        raise ValueError(f"need n >= s + 2 (n={d.n}, s={s})")
    ctx = SearchContext(d)
    return _replicate_ctx(ctx, s, rng, corrected, method, screen_size, xi=xi)


def bootstrap_distribution(
    d: Dataset,
    s: int,
    reps: int,
    rng: RngStream,
    corrected: bool = True,
    method: str = "two_step",
    screen_size: int = DEFAULT_SCREEN_SIZE,
    scale: str = "per_sqrt_n",
    threads: int = 1,
) -> BootstrapDistribution:
    """The sorted bootstrap null distribution from ``reps`` replicates.

    Replicate i draws its multipliers from the substream ("bootstrap", i),
    so the result is independent of evaluation order and thread count.
    """
    if reps < 100:
        raise ValueError("need reps >= 100")
    if scale not in ("per_sqrt_n", "raw"):
        raise ValueError("scale must be 'per_sqrt_n' or 'raw'")
    if d.n < s + 2:
        raise ValueError(f"need n >= s + 2 (n={d.n}, s={s})")
    ctx = SearchContext(d)
    values = np.empty(reps)

    def one(i: int) -> None:
        values[i] = _replicate_ctx(
            ctx, s, rng.child("bootstrap", i), corrected, method, screen_size
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one, range(reps)))
    else:
        for i in range(reps):
            one(i)
    if scale == "per_sqrt_n":
        values /= sqrt(ctx.n)
    values.sort()
    return BootstrapDistribution(
        values=values,
        reps=reps,
        seed=rng.describe(),
        statistic="cmb" if corrected else "mb",
        scale=scale,
        meta={"method": method, "screen_size": screen_size, "s": s, "n": ctx.n, "p": ctx.p},
    )


def residualize_on_selected(d: Dataset, selected) -> tuple[np.ndarray, np.ndarray, list[int]]:
    """Residuals of the non-selected covariates regressed on the selected ones.

    Returns ``(xr_centered, coord_sd, kept_columns)`` where ``xr_centered``
    holds the centered residualized columns (one per kept non-selected
    covariate), ``coord_sd`` their 1/n-standard deviations, and
    ``kept_columns`` the original column indices. Coordinates spanned exactly
    by the selected set are dropped with a warning.
    """
    sel = sorted(set(int(j) for j in selected))
    if len(sel) == 0:
        raise EmptySelection("selected set must be nonempty")
    if len(sel) >= d.p:
        raise ValueError("selected set must leave at least one covariate out")
    others = [j for j in range(d.p) if j not in set(sel)]
    xc = d.x - d.x.mean(axis=0)
    xs = xc[:, sel]
    xn = xc[:, others]
    gram_ss = (xs.T @ xs) / d.n
    lower = chol_spd(gram_ss)  # SingularGram on collinear selection
    cross = (xs.T @ xn) / d.n
    bmat = cho_solve((lower, True), cross)
    xr = xn - xs @ bmat
    xr -= xr.mean(axis=0)
    var = np.einsum("ij,ij->j", xr, xr) / d.n
    keep = var >= DEGENERATE_COORD_TOL
    dropped = int(np.sum(~keep))
    if dropped:
        warnings.warn(
            f"dropping {dropped} covariate(s) exactly spanned by the selected set",
            RuntimeWarning,
            stacklevel=2,
        )
    kept_cols = [others[i] for i in np.nonzero(keep)[0]]
    return xr[:, keep], np.sqrt(var[keep]), kept_cols


def lla_null_distribution(
    d: Dataset,
    selected,
    reps: int,
    rng: RngStream,
    threads: int = 1,
) -> BootstrapDistribution:
    """Bootstrap null of the selection-adjusted exogeneity statistic.

    Non-selected covariates are residualized on the selected set; each
    replicate forms the multiplier process over those residualized columns
    and takes the max-abs coordinate after normalizing by the coordinate
    standard deviations. Values are on the raw sqrt(n) scale.
    """
    if reps < 100:
        raise ValueError("need reps >= 100")
    xr, coord_sd, kept = residualize_on_selected(d, selected)
    if xr.shape[1] == 0:
        raise DegenerateResponse("no usable coordinates after residualization")
    n = d.n
    values = np.empty(reps)

    def one(i: int) -> None:
        xi = rng.child("bootstrap", i).generator().standard_normal(n)
        z = (xi @ xr) / sqrt(n)
        values[i] = float(np.max(np.abs(z) / coord_sd))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one, range(reps)))
    else:
        for i in range(reps):
            one(i)
    values.sort()
    return BootstrapDistribution(
        values=values,
        reps=reps,
        seed=rng.describe(),
        statistic="lla_mb",
        scale="raw",
        meta={
            "selected": sorted(int(j) for j in selected),
            "dropped_coordinates": int(d.p - len(selected) - len(kept)),
            "n": n,
            "p": d.p,
        },
    )
