"""Least-squares and penalized fitters: OLS, lasso paths with cross-validation,
SCAD via its one-step local linear approximation.

Penalized solvers standardize columns to unit sample variance internally and
map coefficients back, so the l1 penalty acts on the standardized scale (the
finite-sample analogue of working with a correlation design). KKT conditions
are therefore stated in terms of standardized columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._cdcore import cd_weighted_l1
from .core import Dataset, RngStream
from .errors import NoConvergence, SingularDesign

MAX_CD_SWEEPS = 100_000
CD_TOL = 1e-7
#: Columns with standard deviation below this (relative to the largest) are
#: treated as constant and excluded from penalized solves.
CONST_COL_RTOL = 1e-12


@dataclass(frozen=True)
class PenaltySpec:
    """Folded-concave penalty parameters: level ``lam`` and shape ``a`` (> 2)."""

    lam: float
    a: float = 3.7

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.a <= 2:
            raise ValueError("SCAD shape a must exceed 2")


@dataclass(frozen=True)
class FitResult:
    """Coefficients, support, residuals and tuning metadata of one fit."""

    beta: np.ndarray
    intercept: float
    residuals: np.ndarray
    method: str
    meta: dict = field(default_factory=dict)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(j) for j in np.nonzero(self.beta)[0])

    def fitted(self, d: Dataset) -> np.ndarray:
        return self.intercept + d.x @ self.beta


def fit_ols(d: Dataset, indices) -> FitResult:
    """Least squares with intercept on the selected columns (zero elsewhere).

    ``indices`` may be empty (null model: intercept = mean response). The
    selected submatrix must have full column rank, and at most n - 2 columns.
    """
    if d.y is None:
        raise ValueError("dataset must carry a response y")
    idx = np.asarray(sorted(set(int(i) for i in indices)), dtype=np.intp)
    n = d.n
    if idx.size > n - 2:
        raise ValueError(f"{idx.size} regressors exceed n - 2 = {n - 2}")
    beta = np.zeros(d.p)
    if idx.size == 0:
        intercept = float(d.y.mean())
        resid = d.y - intercept
        return FitResult(beta, intercept, resid, "ols", {"indices": []})
    xs = d.x[:, idx]
    xm = xs.mean(axis=0)
    xc = xs - xm
    yc = d.y - d.y.mean()
    coef, _, rank, _ = np.linalg.lstsq(xc, yc, rcond=None)
    if rank < idx.size:
        raise SingularDesign(f"selected design has rank {rank} < {idx.size}")
    beta[idx] = coef
    intercept = float(d.y.mean() - xm @ coef)
    resid = d.y - intercept - d.x @ beta
    return FitResult(beta, intercept, resid, "ols", {"indices": [int(i) for i in idx]})


def fit_oracle(d: Dataset, support) -> FitResult:
    """OLS on a known true support (the unattainable benchmark fit)."""
    fit = fit_ols(d, support)
    return FitResult(fit.beta, fit.intercept, fit.residuals, "oracle",
                     {"indices": fit.meta["indices"]})


def _standardize(d: Dataset):
    xm = d.x.mean(axis=0)
    xc = d.x - xm
    sd = np.sqrt(np.einsum("ij,ij->j", xc, xc) / d.n)
    usable = sd > CONST_COL_RTOL * max(float(sd.max()), 1.0)
    xs = np.zeros_like(xc)
    xs[:, usable] = xc[:, usable] / sd[usable]
    return np.asfortranarray(xs), xm, sd, usable


def _finish_penalized(d, beta_std, sd, usable, xm, method, meta) -> FitResult:
    beta = np.zeros(d.p)
    beta[usable] = beta_std[usable] / sd[usable]
    intercept = float(d.y.mean() - xm @ beta)
    resid = d.y - intercept - d.x @ beta
    return FitResult(beta, intercept, resid, method, meta)


def _cd_solve(xs, yc, weights, beta0):
    beta, sweeps, ok = cd_weighted_l1(
        xs, yc, weights, beta0, MAX_CD_SWEEPS, CD_TOL
    )
    if not ok:
        raise NoConvergence(f"coordinate descent not converged after {sweeps} sweeps")
    return beta


def fit_lasso(d: Dataset, lam: float) -> FitResult:
    """l1-penalized least squares, objective (2n)^-1 RSS + lam * |beta|_1.

    Solved by cyclic coordinate descent on standardized columns (penalty on
    the standardized scale); the intercept is unpenalized.
    """
    if d.y is None:
        raise ValueError("dataset must carry a response y")
    if lam < 0:
        raise ValueError("lam must be >= 0")
    xs, xm, sd, usable = _standardize(d)
    yc = d.y - d.y.mean()
    w = np.full(d.p, float(lam))
    beta_std = _cd_solve(xs, yc, w, np.zeros(d.p))
    return _finish_penalized(d, beta_std, sd, usable, xm, "lasso", {"lam": float(lam)})


def lasso_lambda_max(d: Dataset) -> float:
    """Smallest penalty level with an all-zero solution."""
    xs, _, _, _ = _standardize(d)
    yc = d.y - d.y.mean()
    return float(np.max(np.abs(xs.T @ yc)) / d.n)


def cv_lasso(d: Dataset, folds: int = 10, rng: RngStream | None = None,
             n_lambdas: int = 100) -> tuple[float, FitResult]:
    """Ten-fold (by default) cross-validated lasso.

    The grid is log-spaced over [1e-3 * lam_max, lam_max]; folds are a seeded
    permutation split; the path is solved warm-started from large to small
    penalties. The selected level minimizes the mean held-out squared error,
    ties going to the smallest level (denser model). Returns
    ``(lam_star, fit-on-all-data)``.
    """
    if d.y is None:
        raise ValueError("dataset must carry a response y")
    n = d.n
    if not 2 <= folds <= n:
        raise ValueError(f"folds={folds} outside [2, n={n}]")
    rng = rng if rng is not None else RngStream(0)
    lam_max = lasso_lambda_max(d)
    if lam_max <= 0:
        fit = fit_lasso(d, 0.0)
        return 0.0, fit
    grid = np.geomspace(lam_max, 1e-3 * lam_max, n_lambdas)

    perm = rng.child("cv-folds").generator().permutation(n)
    fold_of = np.empty(n, dtype=np.intp)
    for k, chunk in enumerate(np.array_split(perm, folds)):
        fold_of[chunk] = k

    fold_mse = np.zeros((folds, grid.size))
    for k in range(folds):
        test = fold_of == k
        train = ~test
        dtr = Dataset(x=d.x[train], y=d.y[train])
        xs, xm, sd, usable = _standardize(dtr)
        yc = dtr.y - dtr.y.mean()
        beta_std = np.zeros(d.p)
        for gi, lam in enumerate(grid):
            w = np.full(d.p, float(lam))
            beta_std = _cd_solve(xs, yc, w, beta_std)
            beta = np.zeros(d.p)
            beta[usable] = beta_std[usable] / sd[usable]
            intercept = float(dtr.y.mean() - xm @ beta)
            pred = intercept + d.x[test] @ beta
            fold_mse[k, gi] = float(np.mean((d.y[test] - pred) ** 2))
    mean_mse = fold_mse.mean(axis=0)
    best = float(np.min(mean_mse))
    gi_star = int(np.max(np.nonzero(mean_mse <= best)[0]))  # smallest lam on ties
    lam_star = float(grid[gi_star])

    xs, xm, sd, usable = _standardize(d)
    yc = d.y - d.y.mean()
    beta_std = np.zeros(d.p)
    for lam in grid[: gi_star + 1]:
        beta_std = _cd_solve(xs, yc, np.full(d.p, float(lam)), beta_std)
    fit = _finish_penalized(
        d, beta_std, sd, usable, xm, "lasso",
        {"lam": lam_star, "cv_folds": folds, "cv_mse": mean_mse.tolist(),
         "lam_grid": grid.tolist(), "seed": rng.describe()},
    )
    return lam_star, fit


def scad_derivative(t: float, pen: PenaltySpec) -> float:
    """Derivative of the SCAD penalty at t >= 0.

    Equals ``lam`` on [0, lam], decays linearly as (a*lam - t)+ / (a - 1)
    beyond, and vanishes for t >= a*lam.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t <= pen.lam:
        return float(pen.lam)
    return float(max(pen.a * pen.lam - t, 0.0) / (pen.a - 1.0))


def fit_scad_lla(d: Dataset, pen: PenaltySpec, init: FitResult) -> FitResult:
    """One-step local linear approximation to the SCAD objective.

    Solves one weighted lasso with weights given by the SCAD derivative at
    the initial (typically lasso) coefficient magnitudes, evaluated on the
    standardized scale so that a zero initializer reduces exactly to
    ``fit_lasso(pen.lam)``. Coordinates whose weight is zero are unpenalized.
    """
    if d.y is None:
        raise ValueError("dataset must carry a response y")
    if init.beta.shape[0] != d.p:
        raise ValueError("init.beta length must equal p")
    xs, xm, sd, usable = _standardize(d)
    yc = d.y - d.y.mean()
    init_std = np.abs(init.beta * sd)
    w = np.array([scad_derivative(float(t), pen) for t in init_std])
    beta0 = init.beta * sd
    beta0[~usable] = 0.0
    beta_std = _cd_solve(xs, yc, w, beta0)
    return _finish_penalized(
        d, beta_std, sd, usable, xm, "scad_lla",
        {"lam": pen.lam, "a": pen.a, "init_method": init.method},
    )
