"""Monte Carlo harness for conditional coverage and guarantee level.

A run fixes one design matrix, then for each replication draws fresh errors,
fits, builds every requested interval and records its exact conditional
coverage ``F(delta + c) - F(delta - c)``. Replication ``r`` is a pure function
of ``(config, r)``, so the report is identical for any degree of parallelism.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

from . import distributions
from .distributions import ErrorDistribution
from .empirical import GENERATOR_ID, RngStream, quantile
from .intervals import BootstrapConfig, Method, ResidualType, rb_from_roots, rbug_from_roots, sorted_abs_roots
from .model_core import Dataset, check_xf, fit_ols, load_design_csv

DESIGN_STREAM = 0
REPLICATION_STREAM = 1
ERROR_SUBSTREAM = 0
POOL_SUBSTREAM = 1

DEFAULT_QUANTILE_PROBS = (0.25, 0.45, 0.65, 0.85)
EXPERIMENT_BETA = (1.0, 0.5, -1.0, -0.5) + (0.0,) * 11
EXPERIMENT_XF = tuple(0.1 * i for i in range(15))

_POOL_ID = {ResidualType.FITTED: 0, ResidualType.PREDICTIVE: 1}


def conditional_coverage(dist: ErrorDistribution, delta, c):
    """``P(|eps - delta| <= c) = F(delta + c) - F(delta - c)``."""
    c = np.asarray(c, dtype=float)
    if np.any(c < 0):
        raise ValueError("half-width must be non-negative")
    out = dist.cdf(np.asarray(delta) + c) - dist.cdf(np.asarray(delta) - c)
    out = np.clip(out, 0.0, 1.0)
    return out if np.ndim(out) else float(out)


def generate_experiment_design(p: int, n: int, seed: int, intercept_column: bool = False) -> np.ndarray:
    if n <= p:
        raise ValueError("need n > p")
    X = RngStream(seed, DESIGN_STREAM).generator.standard_normal((n, p))
    if intercept_column:
        X[:, 0] = 1.0
    return X


def coverage_quantiles(coverages, probs) -> np.ndarray:
    return np.array([quantile(coverages, q) for q in probs])


@dataclass(frozen=True)
class DesignSpec:
    kind: str = "standard_normal"
    seed: int | None = None
    intercept_column: bool = False
    path: str | None = None

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "intercept_column": self.intercept_column}
        if self.kind == "file":
            d["path"] = self.path
        elif self.seed is not None:
            d["seed"] = self.seed
        return d


@dataclass(frozen=True)
class SimConfig:
    n: int
    dist: ErrorDistribution
    beta: tuple = EXPERIMENT_BETA
    xf: tuple = EXPERIMENT_XF
    design: DesignSpec = field(default_factory=DesignSpec)
    methods: tuple = ("RB", "MFMB", "RBUG", "PRBUG")
    alpha: float = 0.05
    gamma: float = 0.15
    replications: int = 2000
    b_roots: int = 1000
    b_adjust: int = 1000
    b_mc: int = 1000
    coverage_quantile_probs: tuple = DEFAULT_QUANTILE_PROBS
    master_seed: int = 0
    histogram_bin_width: float = 0.0025

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        object.__setattr__(self, "xf", tuple(float(v) for v in self.xf))
        object.__setattr__(self, "methods", tuple(Method.parse(m).value for m in self.methods))
        object.__setattr__(self, "coverage_quantile_probs", tuple(float(q) for q in self.coverage_quantile_probs))
        p = len(self.beta)
        if len(self.xf) != p:
            raise ValueError("xf and beta must have the same length")
        if self.n <= p:
            raise ValueError("need n > p")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        probs = self.coverage_quantile_probs
        if any(not 0 < q < 1 for q in probs) or any(a >= b for a, b in zip(probs, probs[1:])):
            raise ValueError("coverage_quantile_probs must be ascending and inside (0, 1)")
        if not self.methods:
            raise ValueError("at least one method is required")
        self.bootstrap_config()

    @property
    def p(self) -> int:
        return len(self.beta)

    def bootstrap_config(self, residual_type=ResidualType.FITTED) -> BootstrapConfig:
        return BootstrapConfig(
            self.b_roots, self.b_adjust, self.b_mc, self.alpha, self.gamma, residual_type, self.master_seed
        )

    def design_matrix(self) -> np.ndarray:
        if self.design.kind == "file":
            X = load_design_csv(self.design.path)
            if X.shape != (self.n, self.p):
                raise ValueError(f"design file has shape {X.shape}, expected {(self.n, self.p)}")
            if self.design.intercept_column:
                X = X.copy()
                X[:, 0] = 1.0
            return X
        seed = self.master_seed if self.design.seed is None else self.design.seed
        return generate_experiment_design(self.p, self.n, seed, self.design.intercept_column)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "beta": list(self.beta),
            "xf": list(self.xf),
            "design": self.design.to_dict(),
            "error": self.dist.to_dict(),
            "methods": list(self.methods),
            "alpha": self.alpha,
            "gamma": self.gamma,
            "replications": self.replications,
            "bootstrap": {"b_roots": self.b_roots, "b_adjust": self.b_adjust, "b_mc": self.b_mc},
            "coverage_quantile_probs": list(self.coverage_quantile_probs),
            "master_seed": self.master_seed,
            "histogram_bin_width": self.histogram_bin_width,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        from .config_schema import validate_sim_config

        validate_sim_config(d)
        design = d.get("design", {})
        boot = d.get("bootstrap", {})
        kwargs = dict(
            n=d["n"],
            dist=distributions.from_dict(d["error"]),
            design=DesignSpec(
                kind=design.get("kind", "standard_normal"),
                seed=design.get("seed"),
                intercept_column=design.get("intercept_column", False),
                path=design.get("path"),
            ),
        )
        for key in ("beta", "xf", "methods", "coverage_quantile_probs"):
            if key in d:
                kwargs[key] = tuple(d[key])
        for key in ("alpha", "gamma", "replications", "master_seed", "histogram_bin_width"):
            if key in d:
                kwargs[key] = d[key]
        for key in ("b_roots", "b_adjust", "b_mc"):
            if key in boot:
                kwargs[key] = boot[key]
        return cls(**kwargs)


def experiment_model_config(n: int, dist: ErrorDistribution | None = None, **kwargs) -> SimConfig:
    """The 15-regressor benchmark: Gaussian design, ``x_f,i = 0.1 i``."""
    return SimConfig(n=n, dist=dist or distributions.Normal(1.0), **kwargs)


def replicate(cfg: SimConfig, X: np.ndarray, r: int) -> dict:
    """Coverage and half-width of every requested method for replication ``r``.

    A method that raises yields its error message instead of a result.
    """
    rng = RngStream(cfg.master_seed, (REPLICATION_STREAM, r))
    beta = np.asarray(cfg.beta)
    xf = check_xf(cfg.xf, cfg.p)
    eps = cfg.dist.sample(rng.substream(ERROR_SUBSTREAM), cfg.n)
    model = fit_ols(Dataset(X, X @ beta + eps))
    center = model.predict(xf)
    delta = center - float(xf @ beta)

    out = {}
    methods = [Method(m) for m in cfg.methods]
    for rtype in (ResidualType.FITTED, ResidualType.PREDICTIVE):
        wanted = [m for m in methods if m.residual_type is rtype]
        if not wanted:
            continue
        bcfg = cfg.bootstrap_config(rtype)
        pool_rng = rng.substream(POOL_SUBSTREAM, _POOL_ID[rtype])
        try:
            roots = sorted_abs_roots(model, xf, bcfg, pool_rng)
        except Exception as exc:  # noqa: BLE001 - recorded per method
            for m in wanted:
                out[m.value] = f"{type(exc).__name__}: {exc}"
            continue
        for m in wanted:
            try:
                if m.adjusted:
                    pi = rbug_from_roots(model, xf, center, roots, bcfg, pool_rng)
                else:
                    pi = rb_from_roots(center, roots, bcfg)
            except Exception as exc:  # noqa: BLE001
                out[m.value] = f"{type(exc).__name__}: {exc}"
                continue
            out[m.value] = (
                conditional_coverage(cfg.dist, delta, pi.half_width),
                pi.half_width,
                pi.d_hat,
                pi.level_clipped,
            )
    return out


def _replicate_block(cfg, X, indices):
    with threadpool_limits(limits=1):
        return [replicate(cfg, X, r) for r in indices]


@dataclass
class MethodResult:
    coverages: np.ndarray
    half_widths: np.ndarray
    coverage_quantiles: np.ndarray
    guarantee_level: float
    mean_half_width: float
    d_hats: np.ndarray | None
    clipped_count: int

    @property
    def mean_d_hat(self) -> float | None:
        return None if self.d_hats is None else float(self.d_hats.mean())

    def to_dict(self, probs) -> dict:
        return {
            "coverage_quantiles": {repr(q): float(v) for q, v in zip(probs, self.coverage_quantiles)},
            "guarantee_level": self.guarantee_level,
            "mean_half_width": self.mean_half_width,
            "mean_d_hat": self.mean_d_hat,
            "clipped_count": self.clipped_count,
            "coverages": [float(c) for c in self.coverages],
        }


@dataclass
class SimulationReport:
    config: SimConfig
    results: dict
    failures: dict
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        probs = self.config.coverage_quantile_probs
        return {
            "config": self.config.to_dict(),
            "methods": {m: r.to_dict(probs) for m, r in self.results.items()},
            "failures": dict(self.failures),
            "metadata": {"generator": GENERATOR_ID, "wall_time_seconds": self.wall_time},
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["method", "metric", "value"])
        for m, r in self.results.items():
            for q, v in zip(self.config.coverage_quantile_probs, r.coverage_quantiles):
                writer.writerow([m, f"coverage_quantile_{q!r}", repr(float(v))])
            writer.writerow([m, "guarantee_level", repr(r.guarantee_level)])
            writer.writerow([m, "mean_half_width", repr(r.mean_half_width)])
            if r.mean_d_hat is not None:
                writer.writerow([m, "mean_d_hat", repr(r.mean_d_hat)])
        return buf.getvalue()

    def histogram(self, method: str) -> list[tuple[float, float, int]]:
        width = self.config.histogram_bin_width
        nbins = int(round(1.0 / width))
        cov = self.results[method].coverages
        idx = np.clip(np.floor(cov / width).astype(int), 0, nbins - 1)
        counts = np.bincount(idx, minlength=nbins)
        return [(k * width, (k + 1) * width, int(counts[k])) for k in range(nbins)]

    def histogram_csv(self, method: str) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["bin_low", "bin_high", "count"])
        for lo, hi, c in self.histogram(method):
            writer.writerow([repr(lo), repr(hi), c])
        return buf.getvalue()

    def summary_table(self) -> str:
        probs = self.config.coverage_quantile_probs
        cfg = self.config
        head = f"{'Algorithm':<10}" + "".join(f"{q * 100:>10.0f}%" for q in probs) + f"{'Guarantee':>12}"
        lines = [
            f"{cfg.dist.kind} errors, n = {cfg.n}, R = {cfg.replications}, "
            f"nominal coverage {100 * (1 - cfg.alpha):.1f}%, nominal guarantee {100 * (1 - cfg.gamma):.1f}%",
            head,
        ]
        for m, r in self.results.items():
            cells = "".join(f"{100 * v:>10.4f}%" for v in r.coverage_quantiles)
            lines.append(f"{m:<10}{cells}{100 * r.guarantee_level:>11.4f}%")
        for m, msg in self.failures.items():
            lines.append(f"{m:<10} FAILED: {msg}")
        return "\n".join(lines)

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / "report.json", out / "report.csv"]
        paths[0].write_text(self.to_json() + "\n", encoding="utf-8")
        paths[1].write_text(self.to_csv(), encoding="utf-8")
        for m in self.results:
            path = out / f"histogram_{m}.csv"
            path.write_text(self.histogram_csv(m), encoding="utf-8")
            paths.append(path)
        return paths


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, shortest round-trip floats."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False)


def _aggregate(cfg: SimConfig, rows: list[dict]) -> tuple[dict, dict]:
    results, failures = {}, {}
    level = 1.0 - cfg.alpha
    for m in cfg.methods:
        errors = [(r, row[m]) for r, row in enumerate(rows) if isinstance(row[m], str)]
        if errors:
            r, msg = errors[0]
            failures[m] = f"replication {r}: {msg}"
            continue
        cov = np.array([row[m][0] for row in rows])
        hw = np.array([row[m][1] for row in rows])
        adjusted = Method(m).adjusted
        results[m] = MethodResult(
            coverages=cov,
            half_widths=hw,
            coverage_quantiles=coverage_quantiles(cov, cfg.coverage_quantile_probs),
            guarantee_level=np.count_nonzero(cov >= level) / cov.size,
            mean_half_width=float(hw.mean()),
            d_hats=np.array([row[m][2] for row in rows]) if adjusted else None,
            clipped_count=sum(bool(row[m][3]) for row in rows),
        )
    return results, failures


def run_experiment(cfg: SimConfig, threads: int = 1, progress=None) -> SimulationReport:
    start = time.perf_counter()
    X = cfg.design_matrix()
    R = cfg.replications
    threads = max(1, int(threads))
    block = max(1, math.ceil(R / (4 * threads))) if threads > 1 else R
    blocks = [range(s, min(s + block, R)) for s in range(0, R, block)]
    if threads == 1:
        rows = _replicate_block(cfg, X, range(R))
    else:
        parts = Parallel(n_jobs=threads)(delayed(_replicate_block)(cfg, X, b) for b in blocks)
        rows = [row for part in parts for row in part]
    results, failures = _aggregate(cfg, rows)
    return SimulationReport(cfg, results, failures, time.perf_counter() - start)
