"""Domain types and the Bass arrival rate shared by every other module."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# relative tolerance for comparisons against analytic identities
REL_TOL = 1e-9


class ParameterError(ValueError):
    """Raised when an input violates a documented precondition."""


@dataclass(frozen=True)
class MarketParams:
    """Bass market: size ``m``, innovation ``alpha``, imitation ``beta``.

    ``phi`` is the known cap on ``alpha + beta`` handed to learning policies.
    """

    m: int
    alpha: float
    beta: float
    phi: float = 1.0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ParameterError(f"m must be a positive integer, got {self.m!r}")
        if not self.alpha > 0:
            raise ParameterError(f"alpha must be positive, got {self.alpha!r}")
        if not self.beta >= 0:
            raise ParameterError(f"beta must be nonnegative, got {self.beta!r}")
        if not self.phi > 0:
            raise ParameterError(f"phi must be positive, got {self.phi!r}")
        if self.alpha + self.beta > self.phi * (1 + REL_TOL):
            raise ParameterError(
                f"alpha + beta = {self.alpha + self.beta} exceeds phi = {self.phi}")
        object.__setattr__(self, "m", int(self.m))

    def with_beta(self, beta: float) -> "MarketParams":
        return MarketParams(self.m, self.alpha, beta, max(self.phi, self.alpha + beta))


@dataclass(frozen=True)
class AdoptionState:
    d: int
    m: int
    t: float = 0.0

    def __post_init__(self):
        if not 0 <= self.d <= self.m:
            raise ParameterError(f"adopter count {self.d} outside [0, {self.m}]")
        if not self.t >= 0:
            raise ParameterError(f"time must be nonnegative, got {self.t}")

    @property
    def x(self) -> float:
        return self.d / self.m


def adoption_potential(alpha, beta, x):
    """g(x) = (alpha + beta x)(1 - x), the price-free part of the rate."""
    return (alpha + beta * x) * (1.0 - x)


def arrival_rate(params: MarketParams, p, x):
    """Instantaneous adoption rate ``m e^{-p} (alpha + beta x)(1 - x)``.

    Accepts scalars or numpy arrays for ``p`` and ``x``.
    """
    p_arr = np.asarray(p, dtype=float)
    x_arr = np.asarray(x, dtype=float)
    if np.any(p_arr < 0) or not np.all(np.isfinite(p_arr)):
        raise ParameterError("price must be finite and nonnegative")
    if np.any(x_arr < 0) or np.any(x_arr > 1):
        raise ParameterError("adoption fraction must lie in [0, 1]")
    rate = params.m * np.exp(-p_arr) * adoption_potential(params.alpha, params.beta, x_arr)
    if rate.ndim == 0:
        return float(rate)
    return rate


def floor_count(r: float) -> int:
    """Round a fractional count down to an integer."""
    if r < 0 or math.isnan(r):
        raise ParameterError(f"count must be nonnegative, got {r}")
    return math.floor(r)


def icbrt(n: int) -> int:
    """Exact integer cube root: the largest c with c**3 <= n."""
    if n < 0:
        raise ParameterError("icbrt needs a nonnegative integer")
    c = int(round(n ** (1.0 / 3.0)))
    while c ** 3 > n:
        c -= 1
    while (c + 1) ** 3 <= n:
        c += 1
    return c


def epoch_start(m: int, i: int) -> int:
    """floor(2^{i-1} m^{2/3}) computed in exact integer arithmetic.

    ``i = 1`` gives the length of every exploration block, floor(m^{2/3}).
    Float evaluation of m ** (-1/3) * m lands just below integers such as
    10**4 for m = 10**6, hence the integer route.
    """
    if i < 1:
        raise ParameterError("epoch index starts at 1")
    return icbrt(8 ** (i - 1) * m * m)
