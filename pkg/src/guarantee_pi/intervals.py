"""Residual-bootstrap prediction intervals with and without a guarantee-level adjustment.

``RB`` and ``MFMB`` are the plain residual bootstrap on fitted and on
predictive (leave-one-out) residuals. ``RBUG`` and ``PRBUG`` add a
``d_hat / sqrt(n)`` shift to the quantile level of the bootstrap roots so that
the conditional coverage is at least ``1 - alpha`` with probability about
``1 - gamma``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

from .empirical import RngStream, quantile, resample_indices, sorted_quantile
from .model_core import FittedModel, check_xf

# Bounds the size of the (rows, n) index blocks drawn at once.
_BLOCK_ELEMENTS = 1 << 21

ROOTS_STREAM = 0
OUTER_STREAM = 1
MC_STREAM = 2


class ResidualType(str, enum.Enum):
    FITTED = "fitted"
    PREDICTIVE = "predictive"


class Method(str, enum.Enum):
    RB = "RB"
    MFMB = "MFMB"
    RBUG = "RBUG"
    PRBUG = "PRBUG"

    @property
    def residual_type(self) -> ResidualType:
        if self in (Method.MFMB, Method.PRBUG):
            return ResidualType.PREDICTIVE
        return ResidualType.FITTED

    @property
    def adjusted(self) -> bool:
        return self in (Method.RBUG, Method.PRBUG)

    @classmethod
    def parse(cls, value) -> "Method":
        if isinstance(value, cls):
            return value
        key = str(value).upper().replace("/", "").replace("-", "")
        return cls(key)

    @classmethod
    def select(cls, residual_type: ResidualType, adjusted: bool) -> "Method":
        if residual_type is ResidualType.PREDICTIVE:
            return cls.PRBUG if adjusted else cls.MFMB
        return cls.RBUG if adjusted else cls.RB


@dataclass(frozen=True)
class BootstrapConfig:
    b_roots: int = 2500
    b_adjust: int = 2500
    b_mc: int = 2500
    alpha: float = 0.05
    gamma: float = 0.15
    residual_type: ResidualType = ResidualType.FITTED
    seed: int = 0

    def __post_init__(self):
        for name in ("b_roots", "b_adjust", "b_mc"):
            value = getattr(self, name)
            if int(value) != value or value < 100:
                raise ValueError(f"{name} must be an integer >= 100, got {value!r}")
        for name in ("alpha", "gamma"):
            value = getattr(self, name)
            if not (0.0 < value < 1.0):
                raise ValueError(f"{name} must lie strictly inside (0, 1), got {value!r}")
        object.__setattr__(self, "residual_type", ResidualType(self.residual_type))

    def with_residual_type(self, residual_type: ResidualType) -> "BootstrapConfig":
        if residual_type is self.residual_type:
            return self
        return BootstrapConfig(
            self.b_roots, self.b_adjust, self.b_mc, self.alpha, self.gamma, residual_type, self.seed
        )


@dataclass(frozen=True)
class PredictionInterval:
    center: float
    half_width: float
    lower: float
    upper: float
    nominal_alpha: float
    nominal_gamma: float | None
    adjusted_level: float
    method: str
    d_hat: float | None = None
    level_clipped: bool = False

    @classmethod
    def symmetric(cls, center, half_width, **kwargs) -> "PredictionInterval":
        center, half_width = float(center), float(half_width)
        return cls(
            center=center,
            half_width=half_width,
            lower=center - half_width,
            upper=center + half_width,
            **kwargs,
        )

    def to_dict(self) -> dict:
        return asdict(self)


def _block_rows(n: int) -> int:
    return max(1, _BLOCK_ELEMENTS // n)


def bootstrap_roots(model: FittedModel, xf, cfg: BootstrapConfig, rng: RngStream) -> np.ndarray:
    """Prediction roots ``y*_f - x_f^T beta*`` for ``cfg.b_roots`` bootstrap replicates.

    The refit uses ``x_f^T beta* = x_f^T beta_hat + w @ eps*`` with the cached
    factorization, so every root equals ``eps*_f - w @ eps*``.
    """
    pool = model.residual_pool(cfg.residual_type is ResidualType.PREDICTIVE)
    w = model.prediction_weights(xf)
    n, B = model.n, cfg.b_roots
    future = pool[resample_indices(n, B, rng)]
    shift = np.empty(B)
    rows = _block_rows(n)
    for start in range(0, B, rows):
        stop = min(start + rows, B)
        shift[start:stop] = pool[resample_indices(n, (stop - start, n), rng)] @ w
    return future - shift


def coverage_gap_statistic(e_star, zeta, c_hat: float):
    """``sqrt(n) * (share of |e*| <= c_hat  -  share of |zeta| <= c_hat)``.

    Works on single vectors or row-wise on 2-d arrays; ``n`` is the length of
    the last axis of ``e_star``.
    """
    e_star = np.asarray(e_star, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    n = e_star.shape[-1]
    inside_resid = np.count_nonzero(np.abs(e_star) <= c_hat, axis=-1) / n
    inside_future = np.count_nonzero(np.abs(zeta) <= c_hat, axis=-1) / zeta.shape[-1]
    return math.sqrt(n) * (inside_resid - inside_future)


def adjustment_sample(model: FittedModel, xf, c_hat: float, cfg: BootstrapConfig, rng: RngStream) -> np.ndarray:
    """The ``cfg.b_adjust`` draws of the coverage-gap statistic used to pick ``d_hat``."""
    pool = model.residual_pool(cfg.residual_type is ResidualType.PREDICTIVE)
    w = model.prediction_weights(xf)
    n, B1, B2 = model.n, cfg.b_adjust, cfg.b_mc
    outer = rng.substream(OUTER_STREAM)
    mc = rng.substream(MC_STREAM)
    out = np.empty(B1)
    rows = _block_rows(max(n, B2))
    for start in range(0, B1, rows):
        stop = min(start + rows, B1)
        e = pool[resample_indices(n, (stop - start, n), outer)]
        # x_f^T beta_hat - x_f^T beta_dagger + mean(e*)
        offset = e.mean(axis=1) - e @ w
        zeta = pool[resample_indices(n, (stop - start, B2), mc)] + offset[:, None]
        out[start:stop] = coverage_gap_statistic(e, zeta, c_hat)
    return out


def guarantee_adjustment(model: FittedModel, xf, c_hat: float, cfg: BootstrapConfig, rng: RngStream) -> float:
    """``d_hat``: the ``1 - gamma`` quantile of :func:`adjustment_sample`."""
    return quantile(adjustment_sample(model, xf, c_hat, cfg, rng), 1.0 - cfg.gamma)


def adjusted_level(alpha: float, d_hat: float, n: int, b_roots: int) -> tuple[float, bool]:
    """``1 - alpha + d_hat / sqrt(n)`` clipped to ``[1 / b_roots, 1]``."""
    level = 1.0 - alpha + d_hat / math.sqrt(n)
    floor = 1.0 / b_roots
    if level > 1.0:
        return 1.0, True
    if level < floor:
        return floor, True
    return level, False


def rb_from_roots(center: float, abs_roots_sorted: np.ndarray, cfg: BootstrapConfig) -> PredictionInterval:
    level = 1.0 - cfg.alpha
    return PredictionInterval.symmetric(
        center,
        sorted_quantile(abs_roots_sorted, level),
        nominal_alpha=cfg.alpha,
        nominal_gamma=None,
        adjusted_level=level,
        method=Method.select(cfg.residual_type, adjusted=False).value,
    )


def rbug_from_roots(
    model: FittedModel, xf, center: float, abs_roots_sorted: np.ndarray, cfg: BootstrapConfig, rng: RngStream
) -> PredictionInterval:
    c_hat = sorted_quantile(abs_roots_sorted, 1.0 - cfg.alpha)
    d_hat = guarantee_adjustment(model, xf, c_hat, cfg, rng)
    level, clipped = adjusted_level(cfg.alpha, d_hat, model.n, cfg.b_roots)
    return PredictionInterval.symmetric(
        center,
        sorted_quantile(abs_roots_sorted, level),
        nominal_alpha=cfg.alpha,
        nominal_gamma=cfg.gamma,
        adjusted_level=level,
        method=Method.select(cfg.residual_type, adjusted=True).value,
        d_hat=d_hat,
        level_clipped=clipped,
    )


def sorted_abs_roots(model: FittedModel, xf, cfg: BootstrapConfig, rng: RngStream) -> np.ndarray:
    """Sorted ``|roots|`` drawn from the root sub-stream of ``rng``."""
    return np.sort(np.abs(bootstrap_roots(model, xf, cfg, rng.substream(ROOTS_STREAM))))


def rb_interval(model: FittedModel, xf, cfg: BootstrapConfig, rng: RngStream) -> PredictionInterval:
    """Plain residual bootstrap interval (``RB`` or ``MFMB`` by residual type)."""
    xf = check_xf(xf, model.p)
    return rb_from_roots(model.predict(xf), sorted_abs_roots(model, xf, cfg, rng), cfg)


def rbug_interval(model: FittedModel, xf, cfg: BootstrapConfig, rng: RngStream) -> PredictionInterval:
    """Guarantee-adjusted interval (``RBUG`` or ``PRBUG`` by residual type).

    Uses the same root sub-stream as :func:`rb_interval`, so for a shared
    ``rng`` the two intervals are built from identical roots.
    """
    xf = check_xf(xf, model.p)
    roots = sorted_abs_roots(model, xf, cfg, rng)
    return rbug_from_roots(model, xf, model.predict(xf), roots, cfg, rng)


def prediction_interval(model: FittedModel, xf, method, cfg: BootstrapConfig, rng: RngStream) -> PredictionInterval:
    method = Method.parse(method)
    cfg = cfg.with_residual_type(method.residual_type)
    if method.adjusted:
        return rbug_interval(model, xf, cfg, rng)
    return rb_interval(model, xf, cfg, rng)
