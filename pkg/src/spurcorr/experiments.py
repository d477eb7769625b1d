"""Desk-scale simulation harness: null distributions, bootstrap size studies,
spurious-discovery-probability grids, and the joint-law consistency check.

Every run is fully determined by (config, seed): outer draws, bootstrap
replicates and reference simulations all live on named substreams, so
re-running a configuration reproduces each cell bit for bit. Results are
emitted as plain data (CSV/JSON); no plotting is done here.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .bootstrap import bootstrap_distribution
from .core import Dataset, RngStream
from .datagen import (
    CovarianceModel,
    LinearModelSpec,
    NoiseModel,
    lowrank_model,
    sample_covariates,
    sample_linear_model,
    scenario_model,
    sdp_beta,
)
from .errors import DegenerateFit, InvalidModel
from .inference import check_discovery
from .regression import cv_lasso, fit_ols
from .spurious import compute_max_spurious, compute_spurious_sequence
from .subset_search import DEFAULT_SCREEN_SIZE


@dataclass(frozen=True)
class ExperimentConfig:
    """Shared simulation knobs; unused fields are ignored by a given runner."""

    scenario: str = "isotropic"
    n: int = 100
    p: int = 200
    s_list: tuple[int, ...] = (1,)
    alphas: tuple[float, ...] = (0.05, 0.1)
    reps_outer: int = 100
    reps_inner: int = 400
    reference_reps: int | None = None  # defaults to 8 * reps_outer
    seed: int = 20240
    noise: str = "gaussian"
    method: str = "two_step"
    screen_size: int = DEFAULT_SCREEN_SIZE
    r: int | None = None
    threads: int = 1

    def __post_init__(self):
        if min(self.n, self.p, self.reps_outer, self.reps_inner) < 1:
            raise ValueError("all counts must be >= 1")
        if any(not 0 < a < 1 for a in self.alphas):
            raise ValueError("alphas must lie in (0, 1)")

    def rng(self) -> RngStream:
        return RngStream(self.seed)

    def cov_model(self) -> CovarianceModel:
        return scenario_model(self.scenario, self.p, r=self.r)

    @property
    def ref_reps(self) -> int:
        return self.reference_reps if self.reference_reps else 8 * self.reps_outer


@dataclass
class TableResult:
    """Cell estimates plus the raw per-run values they were computed from."""

    cells: dict
    raw: dict
    config: dict

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "cells": {"|".join(map(str, k)): v for k, v in self.cells.items()},
        }

    def write_csv(self, path) -> None:
        keys = sorted(self.cells)
        fields = sorted({f for v in self.cells.values() for f in v})
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["cell", *fields])
            for k in keys:
                writer.writerow(["|".join(map(str, k))]
                                + [self.cells[k].get(f, "") for f in fields])

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)


def _draw_null_dataset(cfg: ExperimentConfig, rng: RngStream) -> Dataset:
    """Independent covariates and noise (the no-signal design)."""
    d = sample_covariates(cfg.cov_model(), cfg.n, rng.child("covariates"))
    eps = NoiseModel(cfg.noise).sample(cfg.n, rng.child("noise"))
    return d.with_y(eps)


def _parallel_map(fn, count: int, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fn, range(count)))
    else:
        for i in range(count):
            fn(i)


def run_null_distribution(cfg: ExperimentConfig, bins: int = 40,
                          bootstrap_overlay: bool = False) -> dict:
    """Sampling distribution of the max spurious correlation per subset size.

    Draws ``reps_outer`` independent datasets and records the statistic for
    every s in ``s_list``; optionally overlays the corrected-bootstrap
    distribution of the first dataset. Returns histogram-ready data.
    """
    rng = cfg.rng()
    out: dict = {"config": _config_dict(cfg), "per_s": {}}
    values = {s: np.empty(cfg.reps_outer) for s in cfg.s_list}

    def one(i: int) -> None:
        d = _draw_null_dataset(cfg, rng.child("draw", i))
        for s in cfg.s_list:
            est = compute_max_spurious(d, s, method=cfg.method,
                                       screen_size=min(cfg.screen_size, cfg.p))
            values[s][i] = est.r_hat

    _parallel_map(one, cfg.reps_outer, cfg.threads)
    for s in cfg.s_list:
        vals = np.sort(values[s])
        counts, edges = np.histogram(vals, bins=bins)
        entry = {
            "values": vals,
            "hist_counts": counts,
            "hist_edges": edges,
        }
        if bootstrap_overlay:
            d0 = _draw_null_dataset(cfg, rng.child("draw", 0))
            dist = bootstrap_distribution(
                d0, s, cfg.reps_inner, rng.child("overlay", s),
                method=cfg.method, screen_size=min(cfg.screen_size, cfg.p),
                threads=cfg.threads,
            )
            entry["bootstrap_values"] = dist.values
        out["per_s"][s] = entry
    return out


def run_size_study(cfg: ExperimentConfig) -> TableResult:
    """Empirical size of the corrected-bootstrap quantile test.

    A seeded reference simulation (``ref_reps`` independent datasets)
    estimates the true upper-alpha quantile of the statistic; each study
    dataset then records the fraction of its bootstrap replicates at or above
    that quantile. Cells report the mean size, the SD across datasets, the
    plain standard error of the mean, and a total SE that also propagates the
    reference-quantile uncertainty (estimated by resampling the reference
    draws), which does not average out across datasets.
    """
    rng = cfg.rng()
    cells = {}
    raw = {}
    for s in cfg.s_list:
        ref_vals = np.empty(cfg.ref_reps)

        def one_ref(i: int, _s=s, _ref=ref_vals) -> None:
            d = _draw_null_dataset(cfg, rng.child("reference", _s, i))
            _ref[i] = compute_max_spurious(
                d, _s, method=cfg.method,
                screen_size=min(cfg.screen_size, cfg.p)).r_hat

        _parallel_map(one_ref, cfg.ref_reps, cfg.threads)
        ref_sorted = np.sort(ref_vals)

        boot_vals = np.empty((cfg.reps_outer, cfg.reps_inner))

        def one_ds(i: int, _s=s, _store=boot_vals) -> None:
            d = _draw_null_dataset(cfg, rng.child("data", _s, i))
            dist = bootstrap_distribution(
                d, _s, cfg.reps_inner, rng.child("boot", _s, i),
                corrected=True, method=cfg.method,
                screen_size=min(cfg.screen_size, cfg.p), scale="per_sqrt_n",
            )
            _store[i] = dist.values

        _parallel_map(one_ds, cfg.reps_outer, cfg.threads)

        for alpha in cfg.alphas:
            k = int(np.ceil((1.0 - alpha) * cfg.ref_reps))
            q_ref = float(ref_sorted[min(max(k, 1), cfg.ref_reps) - 1])
            sizes = np.mean(boot_vals >= q_ref, axis=1)
            mean = float(np.mean(sizes))
            sd = float(np.std(sizes, ddof=1)) if len(sizes) > 1 else 0.0
            se_mean = sd / sqrt(len(sizes))
            # reference-quantile uncertainty: resample the reference draws
            qboot = _quantile_resample(ref_sorted, alpha, rng.child("refvar", s, str(alpha)))
            sd_q = float(np.std(qboot, ddof=1))
            h = max(sd_q, 1e-6)
            slope = float(
                (np.mean(boot_vals >= q_ref - h) - np.mean(boot_vals >= q_ref + h))
                / (2 * h)
            )
            se_total = sqrt(se_mean**2 + (slope * sd_q) ** 2)
            cells[(s, alpha)] = {
                "mean_size": mean,
                "sd_sizes": sd,
                "se_mean": se_mean,
                "se_total": se_total,
                "reference_quantile": q_ref,
                "reference_quantile_sd": sd_q,
            }
            raw[(s, alpha)] = sizes
    return TableResult(cells=cells, raw=raw, config=_config_dict(cfg))


def _quantile_resample(sorted_vals: np.ndarray, alpha: float, rng: RngStream,
                       draws: int = 200) -> np.ndarray:
    gen = rng.generator()
    m = sorted_vals.size
    k = min(max(int(np.ceil((1.0 - alpha) * m)), 1), m)
    out = np.empty(draws)
    for b in range(draws):
        res = np.sort(gen.choice(sorted_vals, size=m, replace=True))
        out[b] = res[k - 1]
    return out


def discovery_pipeline(
    d: Dataset,
    alpha: float,
    reps: int,
    rng: RngStream,
    method: str = "forward",
    screen_size: int = DEFAULT_SCREEN_SIZE,
    folds: int = 10,
    threads: int = 1,
):
    """Cross-validated lasso, post-lasso refit, then the discovery check.

    Returns ``(report_or_none, spurious_flag, info)``. An empty selection is
    recorded as a spurious discovery (a null model never beats the
    yardstick). Shared by the experiment grid and the CLI so both produce
    identical decisions for identical streams.
    """
    lam, lasso_fit = cv_lasso(d, folds=folds, rng=rng.child("cv"))
    support = lasso_fit.support
    info = {"lambda": lam, "selected": list(support), "s_selected": len(support)}
    if len(support) == 0:
        return None, True, info
    pl_fit = fit_ols(d, support)
    fitted = pl_fit.fitted(d)
    try:
        report = check_discovery(
            d, fitted, len(support), alpha, reps, rng.child("check"),
            method=method, screen_size=screen_size, threads=threads,
        )
    except DegenerateFit:
        return None, True, info
    return report, report.decision == "spurious", info


def run_sdp_study(cfg: ExperimentConfig, n_list=(50, 80), r_list=(30, 60, 90),
                  alpha: float = 0.05, noise_scale: float = 1.0) -> TableResult:
    """Empirical spurious-discovery probability over an (n, r) grid.

    Uses the low-rank design with the alternating sparse coefficient vector;
    each run fits a ten-fold cross-validated lasso, refits OLS on the
    selected support, and checks the discovery at level alpha. The bootstrap
    yardstick runs with the forward-search override (see ``cfg.method``);
    ``noise_scale=0`` is the noiseless testing hook.
    """
    rng = cfg.rng()
    cells = {}
    raw = {}
    for r in r_list:
        if r > cfg.p:
            raise InvalidModel(f"r={r} exceeds p={cfg.p}")
        for n in n_list:
            flags = np.empty(cfg.reps_outer, dtype=bool)
            sizes = np.empty(cfg.reps_outer)

            def one(i: int, _n=n, _r=r, _f=flags, _z=sizes) -> None:
                run_rng = rng.child("sdp", _n, _r, i)
                spec = LinearModelSpec(
                    beta=sdp_beta(cfg.p),
                    cov=lowrank_model(cfg.p, _r),
                    noise=NoiseModel("gaussian"),
                )
                d = sample_linear_model(spec, _n, run_rng.child("sample"),
                                        noise_scale=noise_scale)
                _, spurious, info = discovery_pipeline(
                    d, alpha, cfg.reps_inner, run_rng,
                    method=cfg.method if cfg.method != "two_step" else "forward",
                    screen_size=cfg.screen_size,
                )
                _f[i] = spurious
                _z[i] = info["s_selected"]

            _parallel_map(one, cfg.reps_outer, cfg.threads)
            cells[(n, r)] = {
                "esdp": float(np.mean(flags)),
                "mean_selected": float(np.mean(sizes)),
                "runs": cfg.reps_outer,
                "alpha": alpha,
            }
            raw[(n, r)] = flags.astype(float)
    return TableResult(cells=cells, raw=raw, config=_config_dict(cfg))


def run_joint_null_check(cfg: ExperimentConfig) -> dict:
    """Joint-law check: increments of n * max_corr^2 versus the top squared
    order statistics of independent normals, compared margin by margin.

    Isotropic scenario only. Returns per-margin two-sample KS distances.
    """
    if cfg.scenario != "isotropic":
        raise InvalidModel("joint null check is defined for the isotropic scenario")
    rng = cfg.rng()
    s_max = max(cfg.s_list)
    incs = np.empty((cfg.reps_outer, s_max))

    def one(i: int) -> None:
        d = _draw_null_dataset(cfg, rng.child("draw", i))
        seq = compute_spurious_sequence(d, s_max, method=cfg.method,
                                        screen_size=min(cfg.screen_size, cfg.p))
        r2 = np.array([e.r_hat**2 for e in seq])
        prev = np.concatenate([[0.0], r2[:-1]])
        incs[i] = cfg.n * (r2 - prev)

    _parallel_map(one, cfg.reps_outer, cfg.threads)

    ref = np.empty((cfg.reps_outer, s_max))
    for i in range(cfg.reps_outer):
        z = rng.child("chisq", i).generator().standard_normal(cfg.p)
        sq = np.sort(z * z)[::-1]
        ref[i] = sq[:s_max]

    from scipy.stats import ks_2samp

    ks = [float(ks_2samp(incs[:, k], ref[:, k]).statistic) for k in range(s_max)]
    return {
        "config": _config_dict(cfg),
        "ks_per_margin": ks,
        "increments": incs,
        "reference": ref,
    }


def _config_dict(cfg: ExperimentConfig) -> dict:
    return {
        "scenario": cfg.scenario,
        "n": cfg.n,
        "p": cfg.p,
        "s_list": list(cfg.s_list),
        "alphas": list(cfg.alphas),
        "reps_outer": cfg.reps_outer,
        "reps_inner": cfg.reps_inner,
        "reference_reps": cfg.ref_reps,
        "seed": cfg.seed,
        "noise": cfg.noise,
        "method": cfg.method,
        "screen_size": cfg.screen_size,
        "r": cfg.r,
    }


#: Full-scale configurations mirroring the published grids; they are
#: documentation presets (hours of compute), not part of the test suite.
FULL_SCALE_PRESETS = {
    "size-isotropic": ExperimentConfig(
        scenario="isotropic", n=400, p=2000, s_list=(1, 2, 5, 10),
        alphas=(0.05, 0.1), reps_outer=200, reps_inner=1600,
        reference_reps=1600, noise="uniform_standardized", seed=11,
    ),
    "size-anisotropic": ExperimentConfig(
        scenario="anisotropic", n=400, p=2000, s_list=(1, 2, 5, 10),
        alphas=(0.05, 0.1), reps_outer=200, reps_inner=1600,
        reference_reps=1600, noise="laplace_standardized", seed=12,
    ),
    "sdp-lowrank": ExperimentConfig(
        scenario="lowrank", n=100, p=400, s_list=(1,), alphas=(0.05,),
        reps_outer=200, reps_inner=1000, seed=13, r=120,
    ),
}
