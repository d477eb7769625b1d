"""Acceptance gate: one test per release criterion, each printing PASS/FAIL.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines. Criterion 3 is implemented exactly as stated and is expected to fail
for an analytic reason documented on the test itself; a companion test
validates the same pipeline against the exact finite-sample law.
"""

import json
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import integrate, special

from spurcorr.asymptotics import (
    gumbel_critical_value,
    gumbel_like_cdf,
    gumbel_pvalue,
    max_chisq_centering,
    top_chisq_sum_cdf,
    top_chisq_sum_sampler,
)
from spurcorr.core import Dataset, RngStream
from spurcorr.datagen import LinearModelSpec, identity_model, sample_linear_model
from spurcorr.experiments import ExperimentConfig, run_sdp_study, run_size_study
from spurcorr.inference import exogeneity_test
from spurcorr.regression import FitResult, PenaltySpec, fit_lasso, fit_ols, fit_scad_lla
from spurcorr.spurious import compute_max_spurious
from spurcorr.subset_search import SubsetProblem, exhaustive, two_step

from conftest import make_orthonormal_design


def _report(num, ok, detail=""):
    line = f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    print(line)
    return ok


def test_criterion_1_search_exactness():
    """two_step with a full screen equals exhaustive enumeration."""
    t0 = time.time()
    worst = 0.0
    for seed in range(50):
        g = np.random.default_rng(10_000 + seed)
        n = int(g.integers(20, 40))
        p = int(g.integers(6, 13))
        s = int(g.integers(1, 4))
        x = g.standard_normal((n, p))
        eps = g.standard_normal(n)
        xc = x - x.mean(axis=0)
        v = xc.T @ (eps - eps.mean()) / n
        prob = SubsetProblem(data=Dataset(x=x), target=v, s=s)
        a = two_step(prob, screen_size=p)
        b = exhaustive(prob)
        assert a.subset == b.subset, f"seed {seed}: {a.subset} != {b.subset}"
        worst = max(worst, abs(a.value - b.value))
    elapsed = time.time() - t0
    ok = worst < 1e-10 and elapsed < 10.0
    assert _report(1, ok, f"max value gap {worst:.2e}, {elapsed:.1f}s")


def test_criterion_2_direct_correlation_consistency():
    """r_hat equals the correlation attained by the returned direction."""
    worst = 0.0
    for seed in range(50):
        g = np.random.default_rng(20_000 + seed)
        n = int(g.integers(25, 60))
        p = int(g.integers(5, 15))
        s = int(g.integers(1, min(4, p + 1)))
        d = Dataset(x=g.standard_normal((n, p)), y=g.standard_normal(n))
        est = compute_max_spurious(d, s, method="two_step", screen_size=p)
        idx = list(est.subset)
        xc = d.x - d.x.mean(axis=0)
        ec = d.y - d.y.mean()
        u = xc[:, idx] @ est.alpha[idx]
        direct = abs(float(ec @ u)) / (np.linalg.norm(ec) * np.linalg.norm(u))
        worst = max(worst, abs(direct - est.r_hat))
    ok = worst < 1e-9
    assert _report(2, ok, f"max deviation {worst:.2e}")


@pytest.fixture(scope="module")
def gumbel_limit_sample():
    """2000 draws of n * max_corr^2 - a_p at n=100, p=10^4 (exact s=1 search)."""
    n, p, reps = 100, 10_000, 2000
    rng = RngStream(33_000)
    a_p = max_chisq_centering(p)
    vals = np.empty(reps)
    for i in range(reps):
        gen = rng.child("draw", i).generator()
        x = gen.standard_normal((n, p))
        eps = gen.standard_normal(n)
        xc = x - x.mean(axis=0)
        ec = eps - eps.mean()
        corr = (ec @ xc) / (np.linalg.norm(ec) * np.linalg.norm(xc, axis=0))
        vals[i] = n * float(np.max(corr**2)) - a_p
    return np.sort(vals)


def _ks_against(sorted_vals, cdf):
    k = len(sorted_vals)
    grid_hi = np.arange(1, k + 1) / k
    grid_lo = np.arange(k) / k
    cv = cdf(sorted_vals)
    return float(max(np.max(np.abs(grid_hi - cv)), np.max(np.abs(grid_lo - cv))))


@pytest.mark.xfail(
    strict=True,
    reason=(
        "unattainable as stated: at n=100 the exact law of the max squared "
        "correlation is Beta(1/2,(n-2)/2)-based, and the sup-distance between "
        "its p=10^4 max law and the limit CDF is 0.154 analytically, so no "
        "correct implementation can land under 0.05; the threshold first "
        "becomes reachable near n=400 (0.037). See the companion exact-law "
        "test below, which passes."
    ),
)
def test_criterion_3_gumbel_limit_as_stated(gumbel_limit_sample):
    """KS distance to the limit law at (n=100, p=10^4), as stated."""
    ks = _ks_against(gumbel_limit_sample, np.vectorize(gumbel_like_cdf))
    ok = ks < 0.05
    assert _report(3, ok, f"KS to limit {ks:.4f} at n=100, p=1e4")


def test_criterion_3_companion_exact_law(gumbel_limit_sample):
    """The same sample matches the exact finite-sample law of the statistic.

    For isotropic Gaussian covariates each squared correlation with any
    response is Beta(1/2, (n-2)/2), independently across columns, so the max
    law is known in closed form; KS against it validates the whole pipeline.
    """
    n, p = 100, 10_000
    a_p = max_chisq_centering(p)

    def exact_cdf(t):
        x = np.clip((t + a_p) / n, 0.0, 1.0)
        return special.betainc(0.5, (n - 2) / 2.0, x) ** p

    ks = _ks_against(gumbel_limit_sample, exact_cdf)
    # 99th percentile of the one-sample KS statistic at 2000 draws is 0.036
    ok = ks < 0.04
    assert _report(3, ok, f"companion: KS to exact finite-sample law {ks:.4f}")


def test_criterion_4_quadrature_and_sampler():
    """Limit CDF agrees with its independent reduction and with Monte Carlo."""
    # independent s=2 form evaluated with a generic quadrature
    def reduction(t):
        val, _ = integrate.quad(
            lambda u: np.exp(u / 2) * gumbel_like_cdf(u), -40.0, t / 2.0,
            epsabs=1e-12, limit=200,
        )
        return gumbel_like_cdf(t / 2) + np.exp(-t / 2) / (2 * np.sqrt(np.pi)) * val

    worst = max(
        abs(top_chisq_sum_cdf(t, 2) - reduction(t)) for t in (-2.0, 0.0, 2.0, 6.0)
    )
    assert worst < 1e-6, f"reduction mismatch {worst:.2e}"

    p, reps = 10**5, 200_000
    worst_mc = 0.0
    for s in (2, 3):
        vals = top_chisq_sum_sampler(p, s, reps, RngStream(44_000, ("s", s)))
        for t in (0.0, 4.0):
            emp = float(np.mean(vals <= t))
            worst_mc = max(worst_mc, abs(emp - top_chisq_sum_cdf(t, s)))
    ok = worst < 1e-6 and worst_mc < 0.01
    assert _report(4, ok, f"reduction gap {worst:.1e}, MC gap {worst_mc:.4f}")


def test_criterion_5_bootstrap_size():
    """Mean empirical size of the corrected bootstrap within alpha +- 3 SE."""
    cfg = ExperimentConfig(
        scenario="isotropic", n=200, p=200, s_list=(1, 2), alphas=(0.05, 0.1),
        reps_outer=100, reps_inner=400, reference_reps=800, seed=20_240,
        noise="uniform_standardized",
    )
    res = run_size_study(cfg)
    details = []
    ok = True
    for (s, alpha), cell in sorted(res.cells.items()):
        err = abs(cell["mean_size"] - alpha)
        band = 3 * cell["se_total"]
        details.append(f"s={s},a={alpha}: {cell['mean_size']:.3f} vs {alpha} (3SE {band:.3f})")
        ok = ok and err <= band
    assert _report(5, ok, "; ".join(details))


def test_criterion_6_sdp_trend():
    """Spurious-discovery probability does not increase with the sample size."""
    cfg = ExperimentConfig(scenario="lowrank", n=50, p=100, reps_outer=50,
                           reps_inner=400, seed=20_240, r=30)
    res = run_sdp_study(cfg, n_list=(50, 80), r_list=(30, 60, 90), alpha=0.05)
    inversions = 0
    worst = 0.0
    cells = []
    for r in (30, 60, 90):
        lo = res.cells[(50, r)]["esdp"]
        hi = res.cells[(80, r)]["esdp"]
        cells.append(f"r={r}: {lo:.2f}->{hi:.2f}")
        if hi > lo:
            inversions += 1
            worst = max(worst, hi - lo)
    ok = inversions <= 1 and worst <= 0.05
    assert _report(6, ok, "; ".join(cells))


def test_criterion_7_penalized_fits():
    """Lasso KKT at 1e-6, orthogonal soft-thresholding at 1e-8, LLA reduction."""
    worst_kkt = 0.0
    for seed in range(20):
        g = np.random.default_rng(70_000 + seed)
        n, p = 60, 25
        beta = np.zeros(p)
        beta[:3] = [3.0, -2.0, 1.0]
        x = g.standard_normal((n, p))
        d = Dataset(x=x, y=x @ beta + g.standard_normal(n))
        lam = 0.3
        fit = fit_lasso(d, lam)
        xc = d.x - d.x.mean(axis=0)
        sd = np.sqrt(np.einsum("ij,ij->j", xc, xc) / n)
        grad = (xc / sd).T @ fit.residuals / n
        zero = fit.beta == 0.0
        if zero.any():
            worst_kkt = max(worst_kkt, float(np.max(np.abs(grad[zero])) - lam))
        if (~zero).any():
            worst_kkt = max(
                worst_kkt,
                float(np.max(np.abs(grad[~zero] - lam * np.sign(fit.beta[~zero])))),
            )
    kkt_ok = worst_kkt < 1e-6

    d_orth = make_orthonormal_design(80, 6, seed=71)
    g = np.random.default_rng(72)
    y = d_orth.x @ np.array([2.0, -1.2, 0.6, 0.0, 0.25, -0.05]) + g.standard_normal(80)
    d_orth = Dataset(x=d_orth.x, y=y)
    lam = 0.35
    soft_fit = fit_lasso(d_orth, lam)
    ols = fit_ols(d_orth, range(6))
    soft = np.sign(ols.beta) * np.maximum(np.abs(ols.beta) - lam, 0.0)
    soft_gap = float(np.max(np.abs(soft_fit.beta - soft)))

    lla_exact = True
    for seed in range(5):
        g = np.random.default_rng(73_000 + seed)
        d = Dataset(x=g.standard_normal((50, 10)), y=g.standard_normal(50))
        init = FitResult(np.zeros(10), 0.0, d.y - d.y.mean(), "null", {})
        a = fit_scad_lla(d, PenaltySpec(0.2), init)
        b = fit_lasso(d, 0.2)
        lla_exact = lla_exact and np.array_equal(a.beta, b.beta)

    ok = kkt_ok and soft_gap < 1e-8 and lla_exact
    assert _report(
        7, ok,
        f"worst KKT excess {worst_kkt:.2e}, soft-threshold gap {soft_gap:.2e}, "
        f"zero-init reduction exact: {lla_exact}",
    )


def test_criterion_8_exogeneity_size():
    """Size of the exogeneity test under an exogenous oracle-fit null."""
    beta = np.zeros(100)
    beta[:3] = [1.0, -0.8, 0.6]
    spec = LinearModelSpec(beta=beta, cov=identity_model(100))
    rng = RngStream(515)
    runs = 200
    rej_boot = rej_analytic = 0
    for i in range(runs):
        run_rng = rng.child("run", i)
        d = sample_linear_model(spec, 200, run_rng.child("data"))
        rb = exogeneity_test(d, "oracle", 0.05, "bootstrap_lla",
                             run_rng.child("boot"), reps=400, support=[0, 1, 2])
        ra = exogeneity_test(d, "oracle", 0.05, "analytic",
                             run_rng.child("an"), support=[0, 1, 2])
        rej_boot += rb.decision == "reject_exogeneity"
        rej_analytic += ra.decision == "reject_exogeneity"
    rate_b = rej_boot / runs
    rate_a = rej_analytic / runs
    ok = 0.02 <= rate_b <= 0.10 and 0.02 <= rate_a <= 0.10
    assert _report(8, ok, f"bootstrap {rate_b:.3f}, analytic {rate_a:.3f}")


def test_criterion_9_inverse_consistency():
    """p-value and critical value are exact inverses; frozen critical value."""
    worst = max(
        abs(gumbel_pvalue(gumbel_critical_value(a)) - a) for a in (0.01, 0.05, 0.1)
    )
    import mpmath as mp

    mp.mp.dps = 30  # independent high-precision evaluation
    ref = float(-2 * mp.log(-mp.sqrt(mp.pi) * mp.log(mp.mpf(1) - mp.mpf("0.05"))))
    gap = abs(gumbel_critical_value(0.05) - ref)
    ok = worst < 1e-10 and gap < 1e-12 and abs(ref - 4.7959) < 1e-3
    assert _report(9, ok, f"inverse error {worst:.1e}, critical value {ref:.6f}")


def test_criterion_10_cli_determinism(tmp_path):
    """Byte-identical reports on re-runs, at any thread setting."""
    g = np.random.default_rng(99)
    x = g.standard_normal((30, 10))
    y = g.standard_normal(30)
    from spurcorr.io import write_matrix, write_vector

    write_matrix(tmp_path / "X.csv", x)
    write_vector(tmp_path / "y.csv", y)
    write_vector(tmp_path / "fit.csv", y + g.standard_normal(30))
    data = ["--data", str(tmp_path / "X.csv"), "--response", str(tmp_path / "y.csv")]
    invocations = [
        ["maxcorr", *data, "--s", "2", "--seed", "4"],
        ["null-quantile", "--data", str(tmp_path / "X.csv"), "--s", "1",
         "--reps", "120", "--seed", "5"],
        ["check-discovery", *data, "--fitted", str(tmp_path / "fit.csv"),
         "--s-selected", "2", "--reps", "120", "--seed", "6"],
        ["exo-test", *data, "--fit", "oracle", "--support", "0,1",
         "--null", "both", "--reps", "120", "--seed", "7"],
        ["asym", "--s", "2", "--points", "7"],
        ["simulate", "--scenario", "isotropic", "--n", "10", "--p", "4",
         "--seed", "8", "--out", str(tmp_path / "sim.csv")],
    ]
    ok = True
    for argv in invocations:
        outs = []
        for threads in ("1", "3"):
            proc = subprocess.run(
                [sys.executable, "-m", "spurcorr.cli", "--threads", threads, *argv],
                capture_output=True, text=True,
            )
            assert proc.returncode == 0, (argv, proc.stderr)
            outs.append(proc.stdout)
            json.loads(proc.stdout)  # must be valid JSON
        ok = ok and outs[0] == outs[1]
    assert _report(10, ok, f"{len(invocations)} subcommands byte-identical")
