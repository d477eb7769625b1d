"""Decision protocols: spurious-discovery screening and the exogeneity test.

The discovery check compares the correlation between fitted and observed
responses against the corrected-bootstrap upper quantile of the maximum
spurious correlation at the selected model size: a discovery that does not
beat that yardstick is declared spurious. The exogeneity test compares the
scaled maximum residual-covariate correlation against either the
selection-adjusted bootstrap null or the isotropic analytic (Gumbel-type)
null.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .asymptotics import (
    gumbel_critical_value,
    gumbel_pvalue,
    gumbel_test_statistic,
)
from .bootstrap import bootstrap_distribution, lla_null_distribution, quantile
from .core import Dataset, RngStream
from .errors import DegenerateFit, DegenerateResponse
from .regression import FitResult, PenaltySpec, cv_lasso, fit_oracle, fit_scad_lla
from .subset_search import DEFAULT_SCREEN_SIZE

_VAR_TOL = 1e-14


@dataclass(frozen=True)
class TestReport:
    """Statistic, reference, decision and full provenance of one test."""

    statistic: float
    alpha: float
    reference: dict
    decision: str
    p_value: float | None = None
    context: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "alpha": self.alpha,
            "reference": self.reference,
            "p_value": self.p_value,
            "decision": self.decision,
            "context": self.context,
        }


def decide_discovery(observed_corr: float, upper_quantile: float) -> str:
    """Spurious iff the observed correlation does not exceed the quantile."""
    return "spurious" if observed_corr <= upper_quantile else "not_spurious"


def abs_correlation(a: np.ndarray, b: np.ndarray) -> float:
    ac = a - a.mean()
    bc = b - b.mean()
    denom = np.linalg.norm(ac) * np.linalg.norm(bc)
    if denom <= 0:
        raise DegenerateFit("zero-variance vector in correlation")
    return abs(float(ac @ bc)) / denom


def check_discovery(
    d: Dataset,
    fitted: np.ndarray,
    s_selected: int,
    alpha: float,
    reps: int,
    rng: RngStream,
    method: str = "two_step",
    screen_size: int = DEFAULT_SCREEN_SIZE,
    threads: int = 1,
) -> TestReport:
    """Judge whether a fitted model beats the spurious-correlation yardstick.

    The observed |corr(y, fitted)| is compared against the upper-alpha
    quantile of the corrected multiplier bootstrap at subset size
    ``s_selected``; both sides live on the correlation (per sqrt(n)) scale.
    """
    if d.y is None:
        raise ValueError("dataset must carry a response y")
    fitted = np.asarray(fitted, dtype=np.float64).reshape(-1)
    if fitted.shape[0] != d.n:
        raise ValueError("fitted length must equal n")
    if float(np.var(fitted)) < _VAR_TOL:
        raise DegenerateFit("fitted values are numerically constant")
    if s_selected < 1:
        raise ValueError("s_selected must be >= 1")
    observed = abs_correlation(d.y, fitted)
    dist = bootstrap_distribution(
        d,
        s_selected,
        reps,
        rng,
        corrected=True,
        method=method,
        screen_size=screen_size,
        scale="per_sqrt_n",
        threads=threads,
    )
    q = quantile(dist, alpha)
    return TestReport(
        statistic=observed,
        alpha=alpha,
        reference={"type": "bootstrap", "value": q, "reps": reps,
                   "statistic": dist.statistic, "scale": dist.scale},
        decision=decide_discovery(observed, q),
        p_value=dist.p_value(observed),
        context={
            "n": d.n,
            "p": d.p,
            "s": s_selected,
            "seed": rng.describe(),
            "reps": reps,
            "method": method,
            "screen_size": screen_size,
        },
    )


def _residuals_for(d, fit_method, rng, support=None, residuals=None,
                   scad_a=3.7, folds=10):
    """Residual vector, selected set, and fit metadata for the chosen method."""
    meta: dict = {"fit_method": fit_method}
    if fit_method == "given_residuals":
        if residuals is None:
            raise ValueError("given_residuals needs a residuals vector")
        res = np.asarray(residuals, dtype=np.float64).reshape(-1)
        sel = tuple(int(j) for j in support) if support is not None else ()
        return res, sel, meta
    if fit_method == "oracle":
        if support is None:
            raise ValueError("oracle fit needs the true support")
        fit = fit_oracle(d, support)
        return fit.residuals, fit.support, meta
    if fit_method == "lasso_cv":
        lam, fit = cv_lasso(d, folds=folds, rng=rng.child("cv"))
        meta["lambda_lasso"] = lam
        return fit.residuals, fit.support, meta
    if fit_method == "scad_lla":
        lam, lasso_fit = cv_lasso(d, folds=folds, rng=rng.child("cv"))
        fit = fit_scad_lla(d, PenaltySpec(lam, scad_a), lasso_fit)
        meta["lambda_lasso"] = lam
        meta["lambda_scad"] = lam
        meta["scad_a"] = scad_a
        return fit.residuals, fit.support, meta
    raise ValueError(f"unknown fit_method {fit_method!r}")


def max_abs_corr_statistic(d: Dataset, residuals: np.ndarray, exclude=()) -> float:
    """sqrt(n) times the largest |corr(X_j, residuals)| over j outside ``exclude``."""
    res_c = residuals - residuals.mean()
    var = float(res_c @ res_c) / d.n
    if var < _VAR_TOL:
        raise DegenerateResponse("residuals are numerically zero")
    xc = d.x - d.x.mean(axis=0)
    norms = np.linalg.norm(xc, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.abs(res_c @ xc) / (np.linalg.norm(res_c) * norms)
    corr[norms <= 0] = 0.0
    if len(exclude):
        corr[np.asarray(sorted(exclude), dtype=np.intp)] = 0.0
    return sqrt(d.n) * float(np.max(corr))


def exogeneity_test(
    d: Dataset,
    fit_method: str,
    alpha: float,
    null: str,
    rng: RngStream,
    reps: int = 1000,
    support=None,
    residuals=None,
    scad_a: float = 3.7,
    folds: int = 10,
    threads: int = 1,
) -> TestReport:
    """Test that every covariate is uncorrelated with the model noise.

    ``fit_method`` is one of lasso_cv, scad_lla, oracle (requires
    ``support``), given_residuals (requires ``residuals``). ``null`` is
    ``bootstrap_lla`` (selection-adjusted multiplier bootstrap; the statistic
    maximizes over non-selected covariates) or ``analytic`` (isotropic
    Gumbel-type approximation; maximizes over all covariates). Rejects when
    the statistic reaches the level-alpha reference.
    """
    if d.y is None:
        raise ValueError("dataset must carry a response y")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    res, selected, meta = _residuals_for(
        d, fit_method, rng, support=support, residuals=residuals,
        scad_a=scad_a, folds=folds,
    )
    context = {
        "n": d.n,
        "p": d.p,
        "s": len(selected),
        "selected": list(selected),
        "seed": rng.describe(),
        "reps": reps,
        "method": fit_method,
        "null": null,
        **meta,
    }
    if null == "analytic":
        t_stat = max_abs_corr_statistic(d, res)
        j = gumbel_test_statistic(t_stat, d.p)
        j_alpha = gumbel_critical_value(alpha)
        p_val = gumbel_pvalue(j)
        decision = "reject_exogeneity" if j >= j_alpha else "fail_to_reject"
        context["gumbel_statistic"] = j
        return TestReport(
            statistic=t_stat,
            alpha=alpha,
            reference={"type": "analytic", "value": j_alpha, "scale": "gumbel"},
            decision=decision,
            p_value=p_val,
            context=context,
        )
    if null != "bootstrap_lla":
        raise ValueError(f"unknown null {null!r}")
    if len(selected) == 0:
        # no selection to adjust for: plain size-one multiplier bootstrap
        t_stat = max_abs_corr_statistic(d, res)
        dist = bootstrap_distribution(
            d, 1, reps, rng.child("null"), corrected=False, scale="raw",
            threads=threads,
        )
        context["note"] = "empty selection: plain s=1 multiplier bootstrap null"
    else:
        t_stat = max_abs_corr_statistic(d, res, exclude=selected)
        dist = lla_null_distribution(d, selected, reps, rng.child("null"),
                                     threads=threads)
        context["dropped_coordinates"] = dist.meta["dropped_coordinates"]
    q = quantile(dist, alpha)
    decision = "reject_exogeneity" if t_stat >= q else "fail_to_reject"
    return TestReport(
        statistic=t_stat,
        alpha=alpha,
        reference={"type": "bootstrap", "value": q, "reps": reps,
                   "statistic": dist.statistic, "scale": dist.scale},
        decision=decision,
        p_value=dist.p_value(t_stat),
        context=context,
    )
