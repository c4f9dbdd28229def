"""Zero-mean error laws with the derivatives the variance formulas need."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .empirical import RngStream, as_sample


class ErrorDistribution:
    """Common interface; subclasses supply closed forms where they exist."""

    kind: str
    analytic = True

    def cdf(self, x):
        raise NotImplementedError

    def cdf_left(self, x):
        """Left limit ``F(x-)``; equals ``cdf`` for continuous laws."""
        return self.cdf(x)

    def pdf(self, x):
        raise NotImplementedError

    def pdf_deriv(self, x):
        raise NotImplementedError

    def h(self, x):
        """``E[eps * 1{eps <= x}]``."""
        raise NotImplementedError

    @property
    def variance(self) -> float:
        raise NotImplementedError

    def sample(self, rng: RngStream, size):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Normal(ErrorDistribution):
    sigma: float = 1.0
    kind = "normal"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def cdf(self, x):
        return special.ndtr(np.asarray(x, dtype=float) / self.sigma)

    def pdf(self, x):
        z = np.asarray(x, dtype=float) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2 * math.pi))

    def pdf_deriv(self, x):
        x = np.asarray(x, dtype=float)
        return -x / self.sigma**2 * self.pdf(x)

    def h(self, x):
        return -self.sigma**2 * self.pdf(x)

    @property
    def variance(self) -> float:
        return self.sigma**2

    def sample(self, rng: RngStream, size):
        return rng.generator.normal(0.0, self.sigma, size=size)

    def to_dict(self) -> dict:
        return {"kind": "normal", "sigma": self.sigma}


@dataclass(frozen=True)
class Laplace(ErrorDistribution):
    """Laplace law with location 0; variance ``2 * scale**2``."""

    scale: float = 1.0 / math.sqrt(2.0)
    kind = "laplace"

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    def cdf(self, x):
        x = np.asarray(x, dtype=float) / self.scale
        return np.where(x < 0, 0.5 * np.exp(np.minimum(x, 0.0)), 1.0 - 0.5 * np.exp(-np.maximum(x, 0.0)))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-np.abs(x) / self.scale) / (2.0 * self.scale)

    def pdf_deriv(self, x):
        # one-sided value at 0 is ambiguous; the sign convention returns 0 there
        x = np.asarray(x, dtype=float)
        return -np.sign(x) * self.pdf(x) / self.scale

    def h(self, x):
        x = np.asarray(x, dtype=float)
        b = self.scale
        neg = 0.5 * np.exp(np.minimum(x, 0.0) / b) * (x - b)
        pos = -0.5 * np.exp(-np.maximum(x, 0.0) / b) * (x + b)
        return np.where(x <= 0, neg, pos)

    @property
    def variance(self) -> float:
        return 2.0 * self.scale**2

    def sample(self, rng: RngStream, size):
        return rng.generator.laplace(0.0, self.scale, size=size)

    def to_dict(self) -> dict:
        return {"kind": "laplace", "scale": self.scale}


@dataclass(frozen=True, eq=False)
class Empirical(ErrorDistribution):
    """Plug-in law of a sample; no density, so only ``cdf`` and ``h`` exist."""

    values: np.ndarray = field(repr=False)
    kind = "empirical"
    analytic = False

    def __post_init__(self):
        v = np.sort(as_sample(self.values))
        object.__setattr__(self, "values", v)

    def cdf(self, x):
        return np.searchsorted(self.values, x, side="right") / self.values.size

    def cdf_left(self, x):
        return np.searchsorted(self.values, x, side="left") / self.values.size

    def pdf(self, x):
        raise NotImplementedError("empirical law has no density")

    pdf_deriv = pdf

    def h(self, x):
        x = np.asarray(x, dtype=float)
        csum = np.concatenate([[0.0], np.cumsum(self.values)])
        return csum[np.searchsorted(self.values, x, side="right")] / self.values.size

    @property
    def variance(self) -> float:
        return float(np.mean((self.values - self.values.mean()) ** 2))

    def sample(self, rng: RngStream, size):
        return self.values[rng.generator.integers(0, self.values.size, size=size)]

    def to_dict(self) -> dict:
        return {"kind": "empirical", "values": self.values.tolist()}


def from_dict(d: dict) -> ErrorDistribution:
    kind = d["kind"].lower()
    if kind == "normal":
        return Normal(float(d.get("sigma", 1.0)))
    if kind == "laplace":
        return Laplace(float(d.get("scale", 1.0 / math.sqrt(2.0))))
    if kind == "empirical":
        return Empirical(np.asarray(d["values"], dtype=float))
    raise ValueError(f"unknown error distribution kind {kind!r}")
