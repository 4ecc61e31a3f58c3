"""Epoch-based learn-and-price policy and baseline pricing policies.

Each policy owns mutable per-run state. ``price_block`` returns the prices
for a run of upcoming customers that are fixed before any of them arrive
(an exploration block, or the remainder of an epoch once its estimates are
frozen); the simulator draws the whole block in one pass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import MarketParams, ParameterError, epoch_start
from .fluid import E, final_adoption, raw_price_curve
from .simulate import History


@dataclass(frozen=True)
class PolicyConfig:
    m: int
    T: float
    phi: float = 1.0
    delta: float = 0.1
    p_explore: float = 0.0
    radius_scale: float = 1.0

    def __post_init__(self):
        if self.m < 8:
            raise ParameterError("m must be at least 8 so every exploration block is non-empty")
        if not self.T > 0:
            raise ParameterError("T must be positive")
        if not self.phi > 0:
            raise ParameterError("phi must be positive")
        if not 0 < self.delta < 1:
            raise ParameterError("delta must lie in (0,1)")
        if not self.radius_scale >= 0:
            raise ParameterError("radius_scale must be nonnegative")
        if not 0 <= self.p_explore <= self.price_cap:
            raise ParameterError(f"p_explore must lie in [0, {self.price_cap}]")

    @property
    def price_cap(self) -> float:
        return math.log(E + self.phi * self.T)

    @property
    def gamma(self) -> float:
        return self.m ** (-1.0 / 3.0)

    @property
    def n_explore(self) -> int:
        # floor(gamma m), at least one exploration customer
        return max(1, epoch_start(self.m, 1))

    def gamma_i(self, i: int) -> float:
        return 2.0 ** (i - 1) * self.gamma

    def _radius_root(self) -> float:
        return (self.radius_scale * math.sqrt(8.0 * math.log(2.0 / self.delta))
                * self.m ** (-1.0 / 3.0))

    def alpha_radius(self) -> float:
        return 8.0 * self.phi / (1.0 - self.gamma) ** 2 * self._radius_root()

    def beta_radius(self, i: int) -> float:
        g = self.gamma
        return 16.0 * self.phi / (self.gamma_i(i) * (1.0 / 3.0 - g) ** 2) * self._radius_root()

    def epoch_bounds(self, i: int) -> tuple[int, int]:
        """Customers ``(start, end]`` of epoch ``i``; the last epoch runs to ``m``."""
        start = epoch_start(self.m, i)
        if self.gamma_i(i) >= 1.0 / 3.0:
            return start, self.m
        return start, min(epoch_start(self.m, i + 1), self.m)


@dataclass
class EstimatorState:
    alpha_hat: float
    A: float
    beta_hat: float = float("nan")
    B: float = float("nan")
    epoch: int = 0
    gamma_i: float = float("nan")

    @property
    def certified(self) -> bool:
        return self.alpha_hat - self.A > 0 and self.beta_hat - self.B > 0


def estimate_alpha(arrival_times, config: PolicyConfig) -> tuple[float, float]:
    """Match the first exploration block's arrival time to its mean."""
    n0 = config.n_explore
    if len(arrival_times) < n0:
        raise ParameterError(f"need {n0} arrivals to estimate alpha, got {len(arrival_times)}")
    tau = float(arrival_times[n0 - 1])
    if not tau > 0:
        raise ParameterError("exploration arrival time must be positive")
    alpha_hat = n0 / (math.exp(-config.p_explore) * config.m * tau)
    return alpha_hat, config.alpha_radius()


def estimate_beta(i: int, alpha_hat: float, arrival_times,
                  config: PolicyConfig) -> tuple[float, float]:
    """Estimate beta from the exploration block that opens epoch ``i``."""
    n0 = config.n_explore
    start, _ = config.epoch_bounds(i)
    if len(arrival_times) < start + n0:
        raise ParameterError(f"epoch {i} exploration block not yet observed")
    t0 = float(arrival_times[start - 1]) if start > 0 else 0.0
    elapsed = float(arrival_times[start + n0 - 1]) - t0
    if not elapsed > 0:
        raise ParameterError("exploration elapsed time must be positive")
    g = config.gamma_i(i)
    rate = n0 / (math.exp(-config.p_explore) * (1.0 - g) * config.m * elapsed)
    return (rate - alpha_hat) / g, config.beta_radius(i)


def lcb_price(state: EstimatorState, d, config: PolicyConfig):
    """Lower confidence price at adoption level ``d / m`` (``d`` may be an array).

    Falls back to the exploration price when either confidence interval
    reaches zero.
    """
    d = np.asarray(d, dtype=float)
    a_lo = state.alpha_hat - state.A
    b_lo = state.beta_hat - state.B
    if not (a_lo > 0 and b_lo > 0):
        out = np.full(d.shape, config.p_explore)
        return float(out) if out.ndim == 0 else out
    est = MarketParams(config.m, state.alpha_hat, state.beta_hat,
                       phi=state.alpha_hat + state.beta_hat)
    l_alpha = 2.0 / a_lo + (state.beta_hat + state.B) / a_lo ** 2
    l_beta = 3.0 / a_lo + 3.0 / b_lo
    with np.errstate(divide="ignore"):
        raw = raw_price_curve(est, config.T, d / config.m)
    out = np.clip(raw - l_alpha * state.A - l_beta * state.B, 0.0, config.price_cap)
    return float(out) if out.ndim == 0 else out


class Algorithm1Policy:
    """Explore, estimate, then post lower-confidence optimal prices per epoch.

    The first ``floor(gamma m)`` customers see the exploration price and fix
    the innovation estimate. Epoch ``i`` covers customers
    ``(gamma_i m, 2 gamma_i m]``: it re-explores for ``floor(gamma m)``
    customers, refreshes the imitation estimate, then posts the clamped
    lower-confidence price. Once ``gamma_i >= 1/3`` the epoch runs to the end.
    """

    def __init__(self, config: PolicyConfig):
        self.config = config
        self.reset()

    def reset(self):
        self.state: Optional[EstimatorState] = None
        self.snapshots: list[dict] = []

    def next_price(self, history: History) -> float:
        return float(self.price_block(history)[0])

    def _epoch_of(self, d: int) -> int:
        i = 1
        while True:
            start, end = self.config.epoch_bounds(i)
            if d < end:
                return i
            i += 1

    def _refresh_estimates(self, history: History):
        # estimate beta for every epoch whose exploration block is complete
        cfg = self.config
        n0 = cfg.n_explore
        j = self.state.epoch + 1
        while j == 1 or cfg.gamma_i(j - 1) < 1.0 / 3.0:
            start, end = cfg.epoch_bounds(j)
            explore_end = min(start + n0, end)
            if start >= cfg.m or history.d < explore_end or explore_end - start < n0:
                return
            beta_hat, B = estimate_beta(j, self.state.alpha_hat, history.arrival_times, cfg)
            self.state.beta_hat, self.state.B = beta_hat, B
            self.state.epoch, self.state.gamma_i = j, cfg.gamma_i(j)
            self.snapshots.append({
                "epoch": j, "gamma_i": cfg.gamma_i(j),
                "alpha_hat": self.state.alpha_hat, "A": self.state.A,
                "beta_hat": beta_hat, "B_i": B,
                "priced_from": explore_end + 1, "priced_to": end,
                "fallback": not self.state.certified,
            })
            j += 1

    def price_block(self, history: History) -> np.ndarray:
        cfg = self.config
        d = history.d
        n0 = cfg.n_explore
        p0 = cfg.p_explore
        if d < n0:
            return np.full(n0 - d, p0)
        if self.state is None:
            alpha_hat, A = estimate_alpha(history.arrival_times, cfg)
            self.state = EstimatorState(alpha_hat, A)
        i = self._epoch_of(d)
        start, end = cfg.epoch_bounds(i)
        explore_end = min(start + n0, end)
        if d < explore_end:
            self._refresh_estimates(history)
            return np.full(explore_end - d, p0)
        self._refresh_estimates(history)
        # customer c pays the price computed at adoption level (c - 1) / m
        return lcb_price(self.state, np.arange(d, end), cfg)


class OraclePolicy:
    """Posts the true optimal curve price ``p*((d-1)/m)`` to customer ``d``.

    Past ``floor(m X*_T)`` customers the curve is undefined and the policy
    posts the fluid price ceiling. Prices are clamped to that ceiling and 0.
    """

    def __init__(self, config: PolicyConfig, alpha: float, beta: float):
        self.config = config
        self.params = MarketParams(config.m, alpha, beta, phi=max(config.phi, alpha + beta))
        self.cap = math.log(E + (alpha + beta) * config.T)
        X = final_adoption(self.params, config.T)
        self.n_curve = math.floor(config.m * X)

    def next_price(self, history: History) -> float:
        return float(self.price_block(history)[0])

    def price_block(self, history: History) -> np.ndarray:
        m = self.config.m
        d = history.d
        out = np.full(m - d, self.cap)
        k = max(self.n_curve - d, 0)
        if k:
            x = np.arange(d, d + k) / m
            out[:k] = np.clip(raw_price_curve(self.params, self.config.T, x), 0.0, self.cap)
        return out


class ConstantPricePolicy:
    def __init__(self, config: PolicyConfig, price: float):
        self.config = config
        self.price = float(price)

    def next_price(self, history: History) -> float:
        return self.price

    def price_block(self, history: History) -> np.ndarray:
        return np.full(history.m - history.d, self.price)


def baseline_policies(config: PolicyConfig, kind: str, *, alpha: Optional[float] = None,
                      beta: Optional[float] = None, price: Optional[float] = None):
    """Build a baseline: ``oracle``, ``max-price``, ``fixed-price`` or ``explore-only``."""
    if kind == "oracle":
        if alpha is None or beta is None:
            raise ParameterError("oracle policy needs the true alpha and beta")
        return OraclePolicy(config, alpha, beta)
    if kind == "max-price":
        return ConstantPricePolicy(config, config.price_cap)
    if kind == "fixed-price":
        if price is None or price < 0:
            raise ParameterError("fixed-price policy needs a nonnegative price")
        return ConstantPricePolicy(config, price)
    if kind == "explore-only":
        return ConstantPricePolicy(config, config.p_explore)
    raise ParameterError(f"unknown policy kind {kind!r}")


def make_policy(config: PolicyConfig, kind: str, **kw):
    if kind == "algorithm1":
        return Algorithm1Policy(config)
    return baseline_policies(config, kind, **kw)
