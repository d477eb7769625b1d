"""Maximum spurious correlation between a response/residual and subset fits.

The statistic is the largest absolute sample correlation between the
(centered) response and any linear combination of any s covariates. It is
computed through the identity

    max_corr^2 = (1 / sigma_eps^2) * max_S  v_S' Sigma_SS^{-1} v_S,

with ``v = (1/n) Xc' eps_c`` the cross-moment vector, which turns the search
into the best-subset quadratic-form problem solved by
:mod:`spurcorr.subset_search`. Every result is re-verified by plugging the
returned direction back into the raw correlation formula.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset
from .errors import DegenerateResponse, NumericalDriftError
from .subset_search import (
    DEFAULT_SCREEN_SIZE,
    SearchContext,
    SubsetSolution,
    _forward_ctx,
    _two_step_ctx,
    SubsetProblem,
    exhaustive,
)

#: Below this variance the response is treated as numerically constant.
DEGENERATE_VAR_TOL = 1e-14
#: Agreement required between the solver value and the recomputed correlation.
SELF_CHECK_TOL = 1e-9


@dataclass(frozen=True)
class SpuriousCorrEstimate:
    """One maximum-spurious-correlation value and its provenance."""

    s: int
    r_hat: float
    subset: tuple[int, ...]
    alpha: np.ndarray
    sigma_eps_sq: float
    method: str
    screen_size: int | None = None
    stalled: bool = False

    def method_descr(self) -> str:
        if self.method == "two_step":
            return f"two_step(screen={self.screen_size})"
        return self.method


def _check_correlation(xc, eps_c, sol: SubsetSolution, r_hat: float) -> None:
    """Recompute the correlation attained by alpha and compare with r_hat."""
    idx = np.asarray(sol.subset, dtype=np.intp)
    u = xc[:, idx] @ sol.alpha[idx]
    denom = np.linalg.norm(eps_c) * np.linalg.norm(u)
    if denom <= 0:
        raise NumericalDriftError("degenerate direction in self-check")
    direct = abs(float(eps_c @ u)) / denom
    if abs(direct - r_hat) > SELF_CHECK_TOL:
        raise NumericalDriftError(
            f"recomputed correlation {direct:.12f} deviates from r_hat {r_hat:.12f}"
        )


def _solve_ctx(ctx: SearchContext, v, s, method, screen_size):
    if method == "exhaustive":
        return exhaustive(SubsetProblem(data=ctx.data, target=v, s=s))
    if method == "two_step":
        return _two_step_ctx(ctx, v, s, min(max(screen_size, s), ctx.p))
    if method == "forward":
        return _forward_ctx(ctx, v, s)
    raise ValueError(f"unknown method {method!r}")


def _estimate(ctx, eps, s, method, screen_size) -> SpuriousCorrEstimate:
    n = ctx.n
    if not 1 <= s <= ctx.p:
        raise ValueError(f"s={s} outside [1, p={ctx.p}]")
    if n < s + 2:
        raise ValueError(f"need n >= s + 2 (n={n}, s={s})")
    eps_c = eps - eps.mean()
    sigma_sq = float(eps_c @ eps_c) / n
    if sigma_sq < DEGENERATE_VAR_TOL:
        raise DegenerateResponse(f"response variance {sigma_sq:.3e} is numerically zero")
    v = (ctx.xc.T @ eps_c) / n
    sol = _solve_ctx(ctx, v, s, method, screen_size)
    r_hat = float(np.sqrt(max(sol.value, 0.0) / sigma_sq))
    if r_hat > 1.0 + SELF_CHECK_TOL:
        raise NumericalDriftError(f"r_hat {r_hat} exceeds 1")
    r_hat = min(r_hat, 1.0)
    _check_correlation(ctx.xc, eps_c, sol, r_hat)
    return SpuriousCorrEstimate(
        s=s,
        r_hat=r_hat,
        subset=sol.subset,
        alpha=sol.alpha,
        sigma_eps_sq=sigma_sq,
        method=method,
        screen_size=screen_size if method == "two_step" else None,
        stalled=sol.stalled,
    )


def compute_max_spurious(
    d: Dataset,
    s: int,
    method: str = "two_step",
    screen_size: int = DEFAULT_SCREEN_SIZE,
) -> SpuriousCorrEstimate:
    """Maximum absolute correlation of y with the best size-s subset fit.

    ``method`` is ``"two_step"`` (screened branch-and-bound, the default) or
    ``"exhaustive"`` (full enumeration, for small problems and testing).
    """
    if d.y is None:
        raise ValueError("dataset must carry a response/noise vector y")
    ctx = SearchContext(d)
    return _estimate(ctx, d.y, s, method, screen_size)


def compute_spurious_sequence(
    d: Dataset,
    s_max: int,
    method: str = "two_step",
    screen_size: int = DEFAULT_SCREEN_SIZE,
) -> list[SpuriousCorrEstimate]:
    """The whole path k = 1..s_max of maximum spurious correlations."""
    if d.y is None:
        raise ValueError("dataset must carry a response/noise vector y")
    if d.n < s_max + 2:
        raise ValueError(f"need n >= s_max + 2 (n={d.n}, s_max={s_max})")
    ctx = SearchContext(d)
    return [_estimate(ctx, d.y, k, method, screen_size) for k in range(1, s_max + 1)]


def residual_spurious(
    d: Dataset,
    fit,
    s: int = 1,
    method: str = "two_step",
    screen_size: int = DEFAULT_SCREEN_SIZE,
) -> SpuriousCorrEstimate:
    """Maximum spurious correlation of regression residuals with the covariates.

    ``fit`` is a :class:`spurcorr.regression.FitResult`; its residuals play
    the role of the noise. For s = 1 this is exactly the largest absolute
    marginal correlation between a covariate and the residual vector.
    """
    residuals = np.asarray(fit.residuals, dtype=np.float64).reshape(-1)
    if residuals.shape[0] != d.n:
        raise ValueError("fit.residuals length must equal n")
    ctx = SearchContext(d)
    return _estimate(ctx, residuals, s, method, screen_size)
