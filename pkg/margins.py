"""
Marginal distribution functions.

Base margins are the ones a simulation draws from; derived margins describe
the columns the generators produce from them (F^2 for the max-AR X, the df of
-X, the df of the row maximum of the 3-dependent vector).
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod

import numpy as np
from scipy import stats

from errors import ValidationError


def _scalar_or_array(a: np.ndarray):
    return a if a.ndim else float(a)


class Margin(ABC):
    """
    A continuous univariate df.

    - cdf: vectorized F(x)
    - ppf: F^{-1}(p), only when an analytic inverse exists (has_ppf)
    - support: (lower, upper) end points, used to bracket numerical inversion
    """

    name = "margin"
    has_ppf = True
    support = (-math.inf, math.inf)

    @abstractmethod
    def cdf(self, x):
        pass

    def ppf(self, p):
        raise NotImplementedError(f"{self.name} has no analytic inverse.")

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """Draws by inversion of a uniform sample."""
        return self.ppf(rng.random(size))

    def __repr__(self) -> str:
        return self.name


class FrozenMargin(Margin):
    """
    A base margin backed by a frozen scipy.stats distribution.

    Sampling goes through the distribution's rvs with the caller's Generator,
    so a (seed, replication) stream fixes the draws.
    """

    def __init__(self, dist) -> None:
        self.dist = dist
        lo, hi = dist.support()
        self.support = (float(lo), float(hi))

    def cdf(self, x):
        return _scalar_or_array(np.asarray(self.dist.cdf(x), dtype=float))

    def ppf(self, p):
        return _scalar_or_array(np.asarray(self.dist.ppf(p), dtype=float))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.asarray(self.dist.rvs(size=size, random_state=rng), dtype=float)


class UnitFrechet(FrozenMargin):
    """F(x) = exp(-1/x), x > 0: the inverse Weibull law with shape 1."""

    name = "unit_frechet"

    def __init__(self) -> None:
        super().__init__(stats.invweibull(1))


class StandardUniform(FrozenMargin):
    """F(x) = x on [0, 1]."""

    name = "standard_uniform"

    def __init__(self) -> None:
        super().__init__(stats.uniform(loc=0.0, scale=1.0))


class PowerMargin(Margin):
    """F^k for a base df F: the df of the maximum of k independent draws."""

    def __init__(self, base: Margin, k: int) -> None:
        if k < 1:
            raise ValidationError(f"Power of a margin should be >= 1, got {k}.")
        self.base = base
        self.k = k
        self.name = f"{base.name}^{k}"
        self.has_ppf = base.has_ppf
        self.support = base.support

    def cdf(self, x):
        return _scalar_or_array(np.asarray(self.base.cdf(x), dtype=float) ** self.k)

    def ppf(self, p):
        return self.base.ppf(_scalar_or_array(np.asarray(p, dtype=float) ** (1.0 / self.k)))


class NegatedMargin(Margin):
    """The df of -X, P(-X <= v) = 1 - F(-v) for a continuous F."""

    def __init__(self, base: Margin) -> None:
        self.base = base
        self.name = f"-{base.name}"
        self.has_ppf = base.has_ppf
        lo, hi = base.support
        self.support = (-hi, -lo)

    def cdf(self, x):
        return _scalar_or_array(1.0 - np.asarray(self.base.cdf(-np.asarray(x, dtype=float)), dtype=float))

    def ppf(self, p):
        return _scalar_or_array(-np.asarray(self.base.ppf(1.0 - np.asarray(p, dtype=float)), dtype=float))


class RowMaxMargin(Margin):
    """
    The df of max(Z_n, Z_{n+1}, Z_{n+2}) for the 3-dependent vector: (H^3 + H^2) / 2.

    No analytic inverse; levels are found by bisection.
    """

    has_ppf = False

    def __init__(self, base: Margin) -> None:
        self.base = base
        self.name = f"rowmax({base.name})"
        self.support = base.support

    def cdf(self, x):
        h = np.asarray(self.base.cdf(x), dtype=float)
        return _scalar_or_array(0.5 * h ** 3 + 0.5 * h ** 2)


BASE_MARGINS = {
    UnitFrechet.name: UnitFrechet,
    StandardUniform.name: StandardUniform,
}


def get_margin(name: str) -> Margin:
    """Looks up a base margin by its config name."""
    if name not in BASE_MARGINS:
        raise ValidationError(f"Unknown margin {name!r}; expected one of {sorted(BASE_MARGINS)}.")
    return BASE_MARGINS[name]()
