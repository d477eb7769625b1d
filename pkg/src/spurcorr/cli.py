"""Command-line front end.

Subcommands: maxcorr, null-quantile, check-discovery, exo-test, asym,
simulate. Every successful run prints a JSON report containing the seed,
replicate counts, library versions and a config echo, so re-running the
echoed configuration reproduces the output byte for byte. Exit codes:
0 success, 1 computational failure (structured error JSON on stdout),
2 usage error (message on stderr).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np
import scipy

from . import __version__
from .asymptotics import (
    LimitLaw,
    gumbel_critical_value,
    max_chisq_centering,
)
from .bootstrap import bootstrap_distribution, quantile
from .core import RngStream
from .datagen import (
    LinearModelSpec,
    NoiseModel,
    sample_covariates,
    sample_linear_model,
    scenario_model,
    sdp_beta,
)
from .errors import ParseError, SpurcorrError
from .experiments import discovery_pipeline
from .inference import check_discovery, exogeneity_test
from .io import read_matrix, write_matrix, write_vector
from .spurious import compute_max_spurious
from .subset_search import DEFAULT_SCREEN_SIZE

_SCENARIOS = ("isotropic", "block", "anisotropic", "lowrank")


def _versions() -> dict:
    return {
        "spurcorr": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": ".".join(map(str, sys.version_info[:3])),
    }


def _positive_int(name):
    def conv(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer") from None
        if v < 1:
            raise argparse.ArgumentTypeError(f"{name} must be >= 1")
        return v

    return conv


def _alpha_type(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("--alpha must be a number") from None
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError("--alpha must lie in (0, 1)")
    return v


def _threads_default() -> int:
    env = os.environ.get("SPURCORR_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spurcorr",
        description="Maximum spurious correlation: statistics, bootstrap nulls, tests.",
    )
    parser.add_argument("--threads", type=_positive_int("--threads"),
                        default=_threads_default(),
                        help="worker threads for replicate loops (env SPURCORR_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_args(sp, response_required=True):
        sp.add_argument("--data", required=True, help="covariate matrix CSV")
        sp.add_argument("--header", action="store_true",
                        help="first row of --data holds column names")
        group = sp.add_mutually_exclusive_group(required=False)
        group.add_argument("--response", help="single-column response CSV")
        group.add_argument("--response-col",
                           help="response column of --data (name or 0-based index)")
        sp.required_response = response_required

    sp = sub.add_parser("maxcorr", help="maximum spurious correlation of y with s covariates")
    add_data_args(sp)
    sp.add_argument("--s", type=_positive_int("--s"), required=True)
    sp.add_argument("--method", choices=("two-step", "forward", "exhaustive"),
                    default="two-step")
    sp.add_argument("--screen-size", type=_positive_int("--screen-size"),
                    default=DEFAULT_SCREEN_SIZE)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--output", help="write the JSON report here as well")

    sp = sub.add_parser("null-quantile", help="corrected-bootstrap quantile of the null")
    add_data_args(sp, response_required=False)
    sp.add_argument("--s", type=_positive_int("--s"), required=True)
    sp.add_argument("--alpha", type=_alpha_type, default=0.05)
    sp.add_argument("--reps", type=_positive_int("--reps"), default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--plain", action="store_true",
                    help="plain multiplier bootstrap (no |xi| correction)")
    sp.add_argument("--method", choices=("two-step", "forward", "exhaustive"),
                    default="two-step")
    sp.add_argument("--screen-size", type=_positive_int("--screen-size"),
                    default=DEFAULT_SCREEN_SIZE)
    sp.add_argument("--dump-reps", help="write sorted replicate values to this CSV")
    sp.add_argument("--output")

    sp = sub.add_parser("check-discovery", help="is a fitted model better than chance?")
    add_data_args(sp)
    sp.add_argument("--fitted", help="single-column CSV of fitted values")
    sp.add_argument("--s-selected", type=_positive_int("--s-selected"),
                    help="number of selected variables behind --fitted")
    sp.add_argument("--fit", choices=("cv-lasso",),
                    help="fit the model internally (cross-validated lasso + OLS refit)")
    sp.add_argument("--alpha", type=_alpha_type, default=0.05)
    sp.add_argument("--reps", type=_positive_int("--reps"), default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--folds", type=_positive_int("--folds"), default=10)
    sp.add_argument("--method", choices=("two-step", "forward", "exhaustive"),
                    default="forward")
    sp.add_argument("--screen-size", type=_positive_int("--screen-size"),
                    default=DEFAULT_SCREEN_SIZE)
    sp.add_argument("--output")

    sp = sub.add_parser("exo-test", help="test that covariates are uncorrelated with the noise")
    add_data_args(sp)
    sp.add_argument("--fit", choices=("lasso-cv", "scad-lla", "oracle", "given-residuals"),
                    default="lasso-cv")
    sp.add_argument("--support", help="comma-separated true support (oracle fit)")
    sp.add_argument("--residuals", help="single-column CSV (given-residuals fit)")
    sp.add_argument("--null", choices=("bootstrap-lla", "analytic", "both"),
                    default="bootstrap-lla")
    sp.add_argument("--alpha", type=_alpha_type, default=0.05)
    sp.add_argument("--reps", type=_positive_int("--reps"), default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--folds", type=_positive_int("--folds"), default=10)
    sp.add_argument("--scad-a", type=float, default=3.7)
    sp.add_argument("--output")

    sp = sub.add_parser("asym", help="analytic limit-law tables")
    sp.add_argument("--s", type=_positive_int("--s"), default=1)
    sp.add_argument("--t-min", type=float, default=-5.0)
    sp.add_argument("--t-max", type=float, default=15.0)
    sp.add_argument("--points", type=_positive_int("--points"), default=81)
    sp.add_argument("--grid-out", help="write the (t, cdf) grid to this CSV")
    sp.add_argument("--alpha", type=_alpha_type, default=0.05)
    sp.add_argument("--p", type=_positive_int("--p"),
                    help="report the centering constant for this dimension")
    sp.add_argument("--output")

    sp = sub.add_parser("simulate", help="draw a synthetic dataset to CSV")
    sp.add_argument("--scenario", choices=_SCENARIOS, required=True)
    sp.add_argument("--n", type=_positive_int("--n"), required=True)
    sp.add_argument("--p", type=_positive_int("--p"), required=True)
    sp.add_argument("--r", type=_positive_int("--r"), help="rank (lowrank scenario)")
    sp.add_argument("--beta", choices=("none", "sdp"), default="none",
                    help="coefficient preset for the response")
    sp.add_argument("--noise", choices=("gaussian", "uniform_standardized",
                                        "laplace_standardized"), default="gaussian")
    sp.add_argument("--noise-scale", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="covariate CSV path")
    sp.add_argument("--response-out", help="response CSV path (with --beta)")
    sp.add_argument("--output")
    return parser


def _load_dataset(args, need_response: bool):
    d = read_matrix(
        args.data,
        header=args.header,
        response_col=getattr(args, "response_col", None),
        response_path=getattr(args, "response", None),
    )
    if need_response and d.y is None:
        raise UsageError("a response is required: give --response or --response-col")
    return d


class UsageError(Exception):
    pass


def _echo(args, skip=("output", "threads")) -> dict:
    echo = {}
    for key, val in sorted(vars(args).items()):
        if key in ("command",) or key in skip or val is None:
            continue
        echo[key.replace("_", "-")] = val
    return echo


def _subset_names(d, subset):
    if d.column_names:
        return [d.column_names[j] for j in subset]
    return None


def _cmd_maxcorr(args) -> dict:
    d = _load_dataset(args, need_response=True)
    method = args.method.replace("-", "_")
    est = compute_max_spurious(d, args.s, method=method, screen_size=args.screen_size)
    report = {
        "command": "maxcorr",
        "r_hat": est.r_hat,
        "subset": list(est.subset),
        "subset_names": _subset_names(d, est.subset),
        "alpha_direction": est.alpha[list(est.subset)].tolist(),
        "sigma_eps_sq": est.sigma_eps_sq,
        "method": est.method_descr(),
        "stalled": est.stalled,
        "n": d.n,
        "p": d.p,
    }
    return report


def _cmd_null_quantile(args) -> dict:
    d = _load_dataset(args, need_response=False)
    rng = RngStream(args.seed)
    dist = bootstrap_distribution(
        d, args.s, args.reps, rng,
        corrected=not args.plain,
        method=args.method.replace("-", "_"),
        screen_size=args.screen_size,
        scale="per_sqrt_n",
        threads=args.threads,
    )
    if args.dump_reps:
        write_vector(args.dump_reps, dist.values, header="replicate_value")
    return {
        "command": "null-quantile",
        "quantile": quantile(dist, args.alpha),
        "alpha": args.alpha,
        "statistic": dist.statistic,
        "scale": dist.scale,
        "median": quantile(dist, 0.5),
        "reps": args.reps,
        "s": args.s,
        "n": d.n,
        "p": d.p,
        "seed": rng.describe(),
    }


def _cmd_check_discovery(args) -> dict:
    d = _load_dataset(args, need_response=True)
    rng = RngStream(args.seed)
    method = args.method.replace("-", "_")
    if args.fit == "cv-lasso":
        report, spurious, info = discovery_pipeline(
            d, args.alpha, args.reps, rng, method=method,
            screen_size=args.screen_size, folds=args.folds, threads=args.threads,
        )
        if report is None:
            return {
                "command": "check-discovery",
                "decision": "spurious",
                "note": "empty selection from the cross-validated lasso",
                "fit": info,
            }
        payload = report.to_json_dict()
        payload["command"] = "check-discovery"
        payload["fit"] = info
        return payload
    if args.fitted is None or args.s_selected is None:
        raise UsageError("check-discovery needs --fitted with --s-selected, or --fit")
    from .io import read_table

    fitted, _ = read_table(args.fitted, header=False)
    if fitted.shape[1] != 1:
        raise UsageError("--fitted must be a single-column CSV")
    report = check_discovery(
        d, fitted[:, 0], args.s_selected, args.alpha, args.reps, rng,
        method=method, screen_size=args.screen_size, threads=args.threads,
    )
    payload = report.to_json_dict()
    payload["command"] = "check-discovery"
    return payload


def _cmd_exo_test(args) -> dict:
    d = _load_dataset(args, need_response=True)
    rng = RngStream(args.seed)
    fit_method = {"lasso-cv": "lasso_cv", "scad-lla": "scad_lla",
                  "oracle": "oracle", "given-residuals": "given_residuals"}[args.fit]
    support = None
    if args.support:
        try:
            support = [int(tok) for tok in args.support.split(",") if tok.strip() != ""]
        except ValueError:
            raise UsageError("--support must be comma-separated integers") from None
    residuals = None
    if args.residuals:
        from .io import read_table

        arr, _ = read_table(args.residuals, header=False)
        if arr.shape[1] != 1:
            raise UsageError("--residuals must be a single-column CSV")
        residuals = arr[:, 0]
    nulls = ["bootstrap_lla", "analytic"] if args.null == "both" else [
        args.null.replace("-", "_")
    ]
    reports = {}
    for null in nulls:
        rep = exogeneity_test(
            d, fit_method, args.alpha, null, rng,
            reps=args.reps, support=support, residuals=residuals,
            scad_a=args.scad_a, folds=args.folds, threads=args.threads,
        )
        reports[null] = rep.to_json_dict()
    payload = {"command": "exo-test"}
    if len(reports) == 1:
        payload.update(next(iter(reports.values())))
    else:
        payload["reports"] = reports
        decisions = {r["decision"] for r in reports.values()}
        payload["nulls_disagree"] = len(decisions) > 1
    return payload


def _cmd_asym(args) -> dict:
    law = LimitLaw(args.s)
    ts = np.linspace(args.t_min, args.t_max, args.points)
    cdf = [law.cdf(float(t)) for t in ts]
    if args.grid_out:
        write_matrix(args.grid_out, np.column_stack([ts, cdf]), header=["t", "cdf"])
    payload = {
        "command": "asym",
        "s": args.s,
        "t_grid": [float(t) for t in ts],
        "cdf": cdf,
        "critical_value": gumbel_critical_value(args.alpha),
        "alpha": args.alpha,
    }
    if args.p:
        payload["centering"] = max_chisq_centering(args.p)
    return payload


def _cmd_simulate(args) -> dict:
    if args.scenario == "lowrank" and not args.r:
        raise UsageError("--scenario lowrank needs --r")
    rng = RngStream(args.seed)
    model = scenario_model(args.scenario, args.p, r=args.r)
    if args.beta == "sdp":
        spec = LinearModelSpec(beta=sdp_beta(args.p), cov=model,
                               noise=NoiseModel(args.noise))
        d = sample_linear_model(spec, args.n, rng, noise_scale=args.noise_scale)
    else:
        d = sample_covariates(model, args.n, rng.child("covariates"))
    write_matrix(args.out, d.x)
    payload = {
        "command": "simulate",
        "scenario": args.scenario,
        "n": args.n,
        "p": args.p,
        "r": args.r,
        "beta": args.beta,
        "out": args.out,
        "seed": rng.describe(),
    }
    if d.y is not None:
        if not args.response_out:
            raise UsageError("--beta sdp needs --response-out")
        write_vector(args.response_out, d.y)
        payload["response_out"] = args.response_out
    return payload


_HANDLERS = {
    "maxcorr": _cmd_maxcorr,
    "null-quantile": _cmd_null_quantile,
    "check-discovery": _cmd_check_discovery,
    "exo-test": _cmd_exo_test,
    "asym": _cmd_asym,
    "simulate": _cmd_simulate,
}


def dispatch(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        payload = _HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SpurcorrError, ValueError) as exc:
        err = {
            "error": type(exc).__name__,
            "message": str(exc),
            "command": args.command,
        }
        if isinstance(exc, ParseError):
            err["row"] = exc.row
            err["col"] = exc.col
        print(json.dumps(err, sort_keys=True))
        return 1
    payload["config"] = _echo(args)
    payload["versions"] = _versions()
    text = json.dumps(payload, sort_keys=True)
    print(text)
    if getattr(args, "output", None):
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
