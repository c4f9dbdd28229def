"""Command line front end.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
from scipy import special, stats
from threadpoolctl import threadpool_limits

from . import distributions, theory
from .empirical import GENERATOR_ID, RngStream
from .exceptions import AlphaOutOfRange, DataError, NumericError
from .intervals import BootstrapConfig, Method, prediction_interval
from .model_core import Dataset, check_xf, design_summary, fit_ols, load_csv
from .simulation import SimConfig, dumps, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
THREADS_ENV = "GUARANTEE_PI_THREADS"


class UsageError(Exception):
    pass


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v.strip()], dtype=float)
    except ValueError as exc:
        raise UsageError(f"cannot parse vector {text!r}") from exc


def _level(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"level must lie strictly inside (0, 1), got {text}")
    return value


def _emit(obj) -> None:
    sys.stdout.write(dumps(obj) + "\n")


def cmd_fit(args) -> int:
    model = fit_ols(load_csv(args.data, intercept=args.intercept))
    _emit(
        {
            "n": model.n,
            "p": model.p,
            "beta_hat": model.beta_hat.tolist(),
            "sigma_hat_sq": model.sigma_hat_sq,
            "residual_mean": model.residual_mean,
            "max_leverage": float(model.leverages.max()),
        }
    )
    return EXIT_OK


def cmd_predict(args) -> int:
    data = load_csv(args.data, intercept=args.intercept)
    xf = _parse_vector(args.xf)
    if args.intercept and xf.size == data.p - 1:
        xf = np.concatenate([[1.0], xf])
    xf = check_xf(xf, data.p)
    method = Method.parse(args.method)
    cfg = BootstrapConfig(
        b_roots=args.b,
        b_adjust=args.b1,
        b_mc=args.b2,
        alpha=args.alpha,
        gamma=args.gamma,
        residual_type=method.residual_type,
        seed=args.seed,
    )
    with threadpool_limits(limits=1):
        model = fit_ols(data)
        pi = prediction_interval(model, xf, method, cfg, RngStream(args.seed))
    _emit(pi.to_dict())
    return EXIT_OK


def oracle_table(alpha: float, gamma: float, sigma: float, n: int, quad_aa: float) -> dict:
    d = float(special.ndtri(1.0 - alpha / 2.0))
    quad_xf = quad_aa / n
    c = theory.gaussian_correction(alpha, gamma, quad_xf)
    return {
        "alpha": alpha,
        "gamma": gamma,
        "sigma": sigma,
        "n": n,
        "quad_aa": quad_aa,
        "naive_guarantee": theory.gaussian_naive_guarantee(alpha),
        "chi2_quantile": float(stats.chi2.ppf(1.0 - gamma, df=1)),
        "correction": c,
        "p1_half_width": sigma * d * math.sqrt(1.0 + quad_xf),
        "p2_half_width": sigma * (d + c),
        "uncorrected_half_width": sigma * d,
    }


def cmd_oracle(args) -> int:
    if not args.gaussian:
        raise UsageError("the oracle assumes Gaussian errors with known sigma; pass --gaussian to confirm")
    if args.n < 1 or args.sigma <= 0 or args.quad_aa < 0:
        raise UsageError("need n >= 1, sigma > 0 and quad_aa >= 0")
    table = oracle_table(args.alpha, args.gamma, args.sigma, args.n, args.quad_aa)
    if args.json:
        _emit(table)
    else:
        width = max(len(k) for k in table)
        for key, value in table.items():
            sys.stdout.write(f"{key:<{width}}  {value:.10g}\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(doc, dict):
        raise DataError("config must be a JSON object")
    doc["master_seed"] = args.seed
    try:
        cfg = SimConfig.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"invalid simulation config: {exc}") from exc
    report = run_experiment(cfg, threads=args.threads)
    report.write(args.out)
    sys.stdout.write(report.summary_table() + "\n")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    dist = distributions.from_dict({"kind": args.error})
    design_rng = RngStream(args.seed, (0,))
    X = np.column_stack([np.ones(args.n), design_rng.generator.standard_normal(args.n)])
    xf = _parse_vector(args.xf)
    ctx = theory.TheoryContext(dist, design_summary(Dataset(X, np.zeros(args.n)), xf))
    if args.x is None:
        x = float(np.asarray(_coverage_quantile(dist, 1.0 - args.alpha)))
    else:
        x = args.x
    u = theory.u_function(ctx, x)
    draws = theory.sample_error_process(
        ctx, Dataset(X, np.zeros(args.n)), args.draws, [x], RngStream(args.seed, (1,)), args.nested, args.threads
    )[:, 0]
    ks = stats.kstest(draws, "norm", args=(0.0, math.sqrt(u)))
    _emit(
        {
            "n": args.n,
            "x": x,
            "draws": args.draws,
            "nested": args.nested,
            "error": dist.to_dict(),
            "xf": xf.tolist(),
            "u": u,
            "sample_mean": float(draws.mean()),
            "sample_variance": float(draws.var(ddof=1)),
            "ks_distance": float(ks.statistic),
            "ks_pvalue": float(ks.pvalue),
            "generator": GENERATOR_ID,
        }
    )
    return EXIT_OK


def _coverage_quantile(dist, level: float) -> float:
    """Half-width ``c`` with ``F(c) - F(-c) = level`` for a symmetric law."""
    from scipy.optimize import brentq

    return brentq(lambda c: float(dist.cdf(c) - dist.cdf(-c)) - level, 0.0, 100.0, xtol=1e-14)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="guarantee-pi",
        description="Bootstrap prediction intervals with a controllable guarantee level.",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    def add_data(p):
        p.add_argument("--data", required=True, help="CSV with columns x1..xp,y and a header row")
        p.add_argument("--intercept", action="store_true", help="prepend a column of ones")

    def add_threads(p):
        p.add_argument("--threads", type=int, default=None, help=f"worker count (env {THREADS_ENV})")

    p = sub.add_parser("fit", help="least-squares fit summary")
    add_data(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="prediction interval at a new regressor")
    add_data(p)
    p.add_argument("--xf", required=True, help="comma-separated regressor vector")
    p.add_argument("--method", default="rbug", choices=["rb", "mfmb", "rbug", "prbug"])
    p.add_argument("--alpha", type=_level, default=0.05)
    p.add_argument("--gamma", type=_level, default=0.15)
    p.add_argument("--b", type=int, default=2500)
    p.add_argument("--b1", type=int, default=2500)
    p.add_argument("--b2", type=int, default=2500)
    p.add_argument("--seed", type=int, default=0)
    add_threads(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("oracle", help="closed-form Gaussian guarantee quantities")
    p.add_argument("--alpha", type=_level, default=0.05)
    p.add_argument("--gamma", type=_level, default=0.10)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--quad-aa", type=float, default=1.0, help="x_f^T (X^T X / n)^{-1} x_f")
    p.add_argument("--gaussian", action="store_true", help="confirm Gaussian errors with known sigma")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("simulate", help="Monte Carlo coverage / guarantee experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    add_threads(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("diagnose", help="compare the coverage error with its Gaussian limit")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--draws", type=int, default=5000)
    p.add_argument("--nested", type=int, default=2000)
    p.add_argument("--error", choices=["normal", "laplace"], default="normal")
    p.add_argument("--xf", default="1,1", help="regressor for the intercept + slope design")
    p.add_argument("--x", type=float, default=None, help="half-width (default: population 1-alpha quantile)")
    p.add_argument("--alpha", type=_level, default=0.05)
    add_threads(p)
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None) is None and hasattr(args, "threads"):
        args.threads = default_threads()
    try:
        return args.func(args)
    except (UsageError, AlphaOutOfRange) as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except DataError as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return EXIT_DATA
    except NumericError as exc:
        sys.stderr.write(f"numeric error: {exc}\n")
        return EXIT_NUMERIC
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
