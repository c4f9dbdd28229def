"""Least-squares fitting and the residual constructions the bootstrap consumes."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import DataError, DimensionMismatch, LeverageOne, RankDeficient

RANK_TOL = 1e-12
LEVERAGE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        n, p = X.shape
        if p < 1 or n <= p:
            raise DimensionMismatch(f"need n > p >= 1, got n={n}, p={p}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains non-finite entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def _qr_full_rank(X: np.ndarray):
    Q, R = np.linalg.qr(X, mode="reduced")
    sv = np.linalg.svd(R, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] / sv[0] < RANK_TOL:
        raise RankDeficient("design matrix is not of full column rank")
    return Q, R


@dataclass(frozen=True, eq=False)
class FittedModel:
    """OLS fit of a :class:`Dataset` with a cached QR factorization.

    ``raw_residuals`` are ``y - X beta_hat``; ``centered_residuals`` subtract
    their mean (``residual_mean``); ``sigma_hat_sq`` is the mean square of the
    centered residuals.
    """

    dataset: Dataset
    beta_hat: np.ndarray
    leverages: np.ndarray
    raw_residuals: np.ndarray
    centered_residuals: np.ndarray
    residual_mean: float
    sigma_hat_sq: float
    q_factor: np.ndarray = field(repr=False)
    r_factor: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def p(self) -> int:
        return self.dataset.p

    def solve_gram(self, v: np.ndarray) -> np.ndarray:
        """``(X^T X)^{-1} v`` through the triangular factor."""
        z = solve_triangular(self.r_factor, v, trans="T", lower=False)
        return solve_triangular(self.r_factor, z, lower=False)

    def coefficient_shift(self, noise: np.ndarray) -> np.ndarray:
        """``(X^T X)^{-1} X^T noise`` for a vector or an ``(n, k)`` matrix of noise."""
        return solve_triangular(self.r_factor, self.q_factor.T @ noise, lower=False)

    def prediction_weights(self, xf) -> np.ndarray:
        """Vector ``w = X (X^T X)^{-1} x_f`` so that ``x_f^T (X^T X)^{-1} X^T e = w @ e``."""
        xf = check_xf(xf, self.p)
        z = solve_triangular(self.r_factor, xf, trans="T", lower=False)
        return self.q_factor @ z

    def predict(self, xf) -> float:
        return float(check_xf(xf, self.p) @ self.beta_hat)

    @cached_property
    def predictive_residuals(self) -> np.ndarray:
        return predictive_residuals(self)

    def residual_pool(self, predictive: bool) -> np.ndarray:
        return self.predictive_residuals if predictive else self.centered_residuals


def check_xf(xf, p: int) -> np.ndarray:
    xf = np.asarray(xf, dtype=float).reshape(-1)
    if xf.shape[0] != p:
        raise DimensionMismatch(f"x_f has length {xf.shape[0]}, expected {p}")
    if not np.all(np.isfinite(xf)):
        raise DataError("x_f contains non-finite entries")
    return xf


def fit_ols(data: Dataset) -> FittedModel:
    Q, R = _qr_full_rank(data.X)
    beta = solve_triangular(R, Q.T @ data.y, lower=False)
    raw = data.y - data.X @ beta
    lam = float(raw.mean())
    centered = raw - lam
    leverages = np.einsum("ij,ij->i", Q, Q)
    return FittedModel(
        dataset=data,
        beta_hat=beta,
        leverages=leverages,
        raw_residuals=raw,
        centered_residuals=centered,
        residual_mean=lam,
        sigma_hat_sq=float(np.mean(centered**2)),
        q_factor=Q,
        r_factor=R,
    )


def predictive_residuals(model: FittedModel) -> np.ndarray:
    """Centered leave-one-out residuals via ``raw_i / (1 - h_i)``."""
    h = model.leverages
    if np.any(h >= 1.0 - LEVERAGE_TOL):
        i = int(np.argmax(h))
        raise LeverageOne(f"observation {i} has leverage {h[i]:.12g}; leave-one-out fit undefined")
    r = model.raw_residuals / (1.0 - h)
    return r - r.mean()


@dataclass(frozen=True, eq=False)
class DesignSummary:
    """Finite-sample plug-ins for the design limits ``A = X^T X / n`` and ``b = mean row``."""

    a_matrix: np.ndarray
    b_vector: np.ndarray
    xf: np.ndarray
    quad_aa: float
    quad_ab: float
    n: int


def design_summary(data: Dataset, xf) -> DesignSummary:
    xf = check_xf(xf, data.p)
    _qr_full_rank(data.X)
    n = data.n
    A = data.X.T @ data.X / n
    b = data.X.mean(axis=0)
    ainv_xf = np.linalg.solve(A, xf)
    return DesignSummary(
        a_matrix=A,
        b_vector=b,
        xf=xf,
        quad_aa=float(xf @ ainv_xf),
        quad_ab=float(ainv_xf @ b),
        n=n,
    )


def load_csv(path, intercept: bool = False) -> Dataset:
    """Read ``x1..xp, y`` columns (header required) into a :class:`Dataset`."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if len(rows) < 2:
        raise DataError("CSV needs a header row and at least one data row")
    header, body = rows[0], rows[1:]
    if len(header) < 2:
        raise DataError("CSV needs at least one regressor column and a response column")
    try:
        values = np.array([[float(cell) for cell in r] for r in body], dtype=float)
    except ValueError as exc:
        raise DataError(f"non-numeric CSV entry: {exc}") from exc
    if values.ndim != 2 or values.shape[1] != len(header):
        raise DataError("ragged CSV rows")
    X, y = values[:, :-1], values[:, -1]
    if intercept:
        X = np.column_stack([np.ones(X.shape[0]), X])
    return Dataset(X, y)


def load_design_csv(path) -> np.ndarray:
    """Read a header-led CSV of regressor columns only."""
    path = Path(path)
    try:
        arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, encoding="utf-8")
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read design matrix from {path}: {exc}") from exc
    if not np.all(np.isfinite(arr)):
        raise DataError("design matrix contains non-finite entries")
    return arr
