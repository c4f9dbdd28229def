"""Closed-form limits for the bootstrap coverage error and Gaussian reference intervals.

``variance_v`` is the covariance kernel of the limiting error process and
``u_function`` the variance of its symmetric-interval contrast. The Gaussian
helpers give the known-variance intervals whose guarantee level is available
in closed form, and the samplers draw the finite-``n`` processes the limits
describe (used as distributional oracles in the tests and by ``diagnose``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from scipy import special, stats
from threadpoolctl import threadpool_limits

from .distributions import ErrorDistribution, Normal
from .empirical import RngStream
from .exceptions import NonPositiveU
from .intervals import PredictionInterval
from .model_core import Dataset, DesignSummary, design_summary, fit_ols

U_TOL = 1e-10


@dataclass(frozen=True)
class TheoryContext:
    dist: ErrorDistribution
    summary: DesignSummary

    def __post_init__(self):
        if not self.dist.analytic:
            raise ValueError("variance formulas need a law with a density")
        if np.linalg.eigvalsh(self.summary.a_matrix)[0] <= 0:
            raise ValueError("design summary is not positive definite")

    @classmethod
    def from_design(cls, dist: ErrorDistribution, X, xf) -> "TheoryContext":
        X = np.asarray(X, dtype=float)
        return cls(dist, design_summary(Dataset(X, np.zeros(X.shape[0])), xf))


def h_function(dist: ErrorDistribution, x):
    return dist.h(x)


def variance_v(ctx: TheoryContext, x, z):
    F, dens, H = ctx.dist.cdf, ctx.dist.pdf, ctx.dist.h
    s = ctx.summary
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    fx, fz = dens(x), dens(z)
    out = (
        ctx.dist.variance * fx * fz * (s.quad_aa + 1.0 - 2.0 * s.quad_ab)
        - (fx * H(z) + fz * H(x)) * (s.quad_ab - 1.0)
        + F(np.minimum(x, z))
        - F(x) * F(z)
    )
    return out if out.ndim else float(out)


def u_function(ctx: TheoryContext, x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("u_function is defined for x > 0")
    u = variance_v(ctx, x, x) + variance_v(ctx, -x, -x) - 2.0 * variance_v(ctx, x, -x)
    u = np.asarray(u)
    if np.any(u < -U_TOL):
        raise NonPositiveU(f"U(x) = {u.min():.3g} < 0; the design/law violates the positivity assumption")
    u = np.maximum(u, 0.0)
    return u if u.ndim else float(u)


def chi2_1_cdf(t: float) -> float:
    """``P(chi^2_1 <= t) = 2 Phi(sqrt t) - 1``."""
    return 2.0 * float(special.ndtr(math.sqrt(max(t, 0.0)))) - 1.0


def _phi(x):
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _phi_deriv(x):
    return -x * _phi(x)


def gaussian_naive_guarantee(alpha: float) -> float:
    """Guarantee level of the textbook Gaussian interval (about 0.6827 for every alpha)."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    d = float(special.ndtri(1.0 - alpha / 2.0))
    return chi2_1_cdf(_phi(d) * d / -_phi_deriv(d))


def gaussian_correction(alpha: float, gamma: float, quad_xf: float) -> float:
    """Half-width correction ``c_{1-gamma}`` in units of sigma.

    ``quad_xf`` is ``x_f^T (X^T X)^{-1} x_f``.
    """
    if not (0 < alpha < 1 and 0 < gamma <= 1):
        raise ValueError("alpha must lie in (0, 1) and gamma in (0, 1]")
    d = float(special.ndtri(1.0 - alpha / 2.0))
    chi2_q = float(stats.chi2.ppf(1.0 - gamma, df=1))
    return -_phi_deriv(d) * quad_xf * chi2_q / (2.0 * _phi(d))


def gaussian_naive_interval(alpha, sigma, summary: DesignSummary, beta_hat_xf: float) -> PredictionInterval:
    d = float(special.ndtri(1.0 - alpha / 2.0))
    half = sigma * d * math.sqrt(1.0 + summary.quad_aa / summary.n)
    return PredictionInterval.symmetric(
        beta_hat_xf, half, nominal_alpha=alpha, nominal_gamma=None, adjusted_level=1.0 - alpha, method="GAUSS_P1"
    )


def gaussian_corrected_interval(alpha, gamma, sigma, summary: DesignSummary, beta_hat_xf: float) -> PredictionInterval:
    d = float(special.ndtri(1.0 - alpha / 2.0))
    c = gaussian_correction(alpha, gamma, summary.quad_aa / summary.n)
    return PredictionInterval.symmetric(
        beta_hat_xf,
        sigma * (d + c),
        nominal_alpha=alpha,
        nominal_gamma=gamma,
        adjusted_level=1.0 - alpha,
        method="GAUSS_P2",
    )


def simulate_gaussian_guarantee(
    half_width: float, alpha: float, sigma: float, X, xf, reps: int, rng: RngStream, block: int = 4096
) -> np.ndarray:
    """Conditional coverages of a fixed-half-width interval centred at ``x_f^T beta_hat``.

    Each replication draws Gaussian errors on the fixed design ``X`` and
    records ``P*(|y_f - x_f^T beta_hat| <= half_width)``.
    """
    model = fit_ols(Dataset(np.asarray(X, dtype=float), np.zeros(len(X))))
    w = model.prediction_weights(xf)
    dist = Normal(sigma)
    out = np.empty(reps)
    for start in range(0, reps, block):
        stop = min(start + block, reps)
        delta = dist.sample(rng, (stop - start, model.n)) @ w
        out[start:stop] = dist.cdf(delta + half_width) - dist.cdf(delta - half_width)
    return out


def sample_error_process(
    ctx: TheoryContext,
    data: Dataset,
    n_draws: int,
    x_grid,
    rng: RngStream,
    nested: int = 2000,
    n_jobs: int = 1,
) -> np.ndarray:
    """Draws of the scaled coverage error ``S(x)`` on ``x_grid``.

    Each draw simulates errors from ``ctx.dist`` on the design of ``data``,
    refits, and compares the exact conditional coverage
    ``F(x + delta) - F(delta - x)`` with the bootstrap-world coverage ``G*(x)``.
    ``G*`` averages ``F_hat(x + t) - F_hat(-x + t -)`` over ``nested`` draws of
    ``t = x_f^T (beta* - beta_hat)``; integrating the future residual out
    exactly leaves only the noise from the refits.

    Draw ``i`` uses sub-stream ``i`` of ``rng``, so the output does not depend
    on ``n_jobs``.
    """
    x_grid = np.atleast_1d(np.asarray(x_grid, dtype=float))
    base = fit_ols(Dataset(data.X, np.zeros(data.n)))
    w = base.prediction_weights(ctx.summary.xf)
    if n_jobs <= 1:
        return _error_process_rows(ctx, base, w, range(n_draws), x_grid, rng, nested)
    step = max(1, -(-n_draws // (4 * n_jobs)))
    blocks = [range(s, min(s + step, n_draws)) for s in range(0, n_draws, step)]
    parts = Parallel(n_jobs=n_jobs)(
        delayed(_error_process_rows)(ctx, base, w, b, x_grid, rng, nested) for b in blocks
    )
    return np.vstack(parts)


def _error_process_rows(ctx, base, w, indices, x_grid, rng, nested):
    n = base.n
    root_n = math.sqrt(n)
    X = base.dataset.X
    out = np.empty((len(indices), x_grid.size))
    with threadpool_limits(limits=1):
        for row, i in enumerate(indices):
            r = rng.substream(i)
            eps = ctx.dist.sample(r, n)
            raw = eps - X @ base.coefficient_shift(eps)
            pool = np.sort(raw - raw.mean())
            delta = float(w @ eps)
            true_cov = ctx.dist.cdf(x_grid + delta) - ctx.dist.cdf(delta - x_grid)
            t = pool[r.generator.integers(0, n, size=(nested, n))] @ w
            upper = np.searchsorted(pool, x_grid[:, None] + t[None, :], side="right")
            lower = np.searchsorted(pool, -x_grid[:, None] + t[None, :], side="left")
            g_star = (upper - lower).mean(axis=1) / n
            out[row] = root_n * (true_cov - g_star)
    return out


def sample_limit_process(ctx: TheoryContext, data: Dataset, n_draws: int, x_grid, rng: RngStream) -> np.ndarray:
    """Draws of the finite-``n`` Gaussian-limit process whose covariance tends to ``variance_v``.

    ``M(x) = sqrt(n) F'(x) (w @ eps - mean(eps)) - n^{-1/2} sum_i (1{eps_i <= x} - F(x))``.
    """
    x_grid = np.atleast_1d(np.asarray(x_grid, dtype=float))
    base = fit_ols(Dataset(data.X, np.zeros(data.n)))
    w = base.prediction_weights(ctx.summary.xf)
    n = base.n
    dens = ctx.dist.pdf(x_grid)
    cdf = ctx.dist.cdf(x_grid)
    out = np.empty((n_draws, x_grid.size))
    for i in range(n_draws):
        eps = ctx.dist.sample(rng.substream(i), n)
        lin = math.sqrt(n) * dens * (w @ eps - eps.mean())
        counts = np.searchsorted(np.sort(eps), x_grid, side="right")
        out[i] = lin - (counts - n * cdf) / math.sqrt(n)
    return out
