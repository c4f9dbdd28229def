"""Empirical distribution helpers: ECDF, inf-definition quantiles, resampling.

All quantiles in the package go through :func:`quantile`, which returns an
order statistic (no interpolation).
"""

from __future__ import annotations

import math

import numpy as np

from .exceptions import AlphaOutOfRange, DataError

GENERATOR_ID = "numpy.random.PCG64DXSM seeded by SeedSequence(entropy=seed, spawn_key=stream key)"

_UINT64_MAX = 2**64 - 1


def as_sample(values) -> np.ndarray:
    """Validate and return ``values`` as a finite 1-d float array."""
    s = np.asarray(values, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise DataError("sample must be a non-empty 1-d vector")
    if not np.all(np.isfinite(s)):
        raise DataError("sample contains non-finite values")
    return s


def ecdf(s, x: float) -> float:
    """Fraction of sample points ``<= x``."""
    s = as_sample(s)
    return np.count_nonzero(s <= x) / s.size


def order_index(m: int, alpha: float) -> int:
    """1-based index ``k`` of the smallest order statistic with ``k / m >= alpha``.

    Starts from ``ceil(m * alpha)`` and corrects for rounding so the result
    agrees with evaluating the ECDF in floating point.
    """
    if not (0.0 < alpha <= 1.0) or math.isnan(alpha):
        raise AlphaOutOfRange(f"alpha must lie in (0, 1], got {alpha!r}")
    k = min(max(math.ceil(m * alpha), 1), m)
    while k > 1 and (k - 1) / m >= alpha:
        k -= 1
    while k < m and k / m < alpha:
        k += 1
    return k


def quantile(s, alpha: float) -> float:
    """Inf-definition quantile ``inf{x : F_m(x) >= alpha}`` of the sample ECDF."""
    s = as_sample(s)
    k = order_index(s.size, alpha)
    return float(np.partition(s, k - 1)[k - 1])


def sorted_quantile(sorted_s: np.ndarray, alpha: float) -> float:
    """:func:`quantile` for an already ascending-sorted array."""
    k = order_index(sorted_s.size, alpha)
    return float(sorted_s[k - 1])


class RngStream:
    """A seeded random stream addressed by ``(seed, stream_id)``.

    ``stream_id`` may be an int or a tuple of ints; it becomes the
    ``spawn_key`` of a :class:`numpy.random.SeedSequence`. Sub-streams are
    derived by appending to the key, so they depend only on the address and
    never on how much of the parent stream has been consumed.
    """

    def __init__(self, seed: int, stream_id=()):
        if not (0 <= int(seed) <= _UINT64_MAX):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if isinstance(stream_id, (int, np.integer)):
            stream_id = (int(stream_id),)
        self.seed = int(seed)
        self.stream_id = tuple(int(k) for k in stream_id)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream_id)
        self.generator = np.random.Generator(np.random.PCG64DXSM(ss))

    def substream(self, *key: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id + tuple(key))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def resample_indices(m: int, size, rng: RngStream) -> np.ndarray:
    """Uniform draws with replacement from ``range(m)``."""
    return rng.generator.integers(0, m, size=size)


def resample(s, count: int, rng: RngStream) -> np.ndarray:
    """``count`` i.i.d. draws with replacement from the sample ``s``."""
    s = as_sample(s)
    if count < 1:
        raise ValueError("count must be >= 1")
    return s[resample_indices(s.size, count, rng)]
