"""Closed forms for the deterministic (fluid) Bass model with pricing.

Along the optimal fluid path the adoption rate is constant, which makes the
terminal adoption level the root of a quadratic and the optimal price an
explicit log-ratio of the adoption potential. Everything here is a pure
function of value types.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import MarketParams, ParameterError, adoption_potential, arrival_rate

E = math.e
BETA_EPS = 1e-12
_X_CEIL = 1.0 - 1e-15


def final_adoption(params: MarketParams, T: float, x0: float = 0.0) -> float:
    """Adoption level reached after time ``T`` of optimal pricing from ``x0``.

    Solves ``X - x0 = (alpha + beta X)(1 - X) T / e`` for the root in [x0, 1).
    """
    alpha, beta = params.alpha, params.beta
    if not 0 <= x0 < 1:
        raise ParameterError(f"initial adoption must lie in [0, 1), got {x0}")
    if T < 0:
        raise ParameterError(f"horizon must be nonnegative, got {T}")
    if T == 0:
        return float(x0)
    c = alpha * T + E * x0
    if beta < BETA_EPS:
        X = c / (alpha * T + E)
    else:
        # beta T X^2 + b X - c = 0; pick the cancellation-free form of the + root
        b = E + (alpha - beta) * T
        root = math.sqrt(b * b + 4.0 * beta * T * c)
        if b >= 0:
            X = 2.0 * c / (b + root)
        else:
            X = (root - b) / (2.0 * beta * T)
    return min(max(X, x0), _X_CEIL)


def _log_ratio_price(alpha, beta, x, X):
    return 1.0 + np.log(adoption_potential(alpha, beta, x) / adoption_potential(alpha, beta, X))


def raw_price_curve(params: MarketParams, T: float, x):
    """Optimal-curve formula evaluated without the ``x <= X*_T`` domain check.

    Learners evaluate the curve at estimated parameters where the estimated
    endpoint can fall short of the current adoption level.
    """
    X = final_adoption(params, T, 0.0)
    out = _log_ratio_price(params.alpha, params.beta, np.asarray(x, dtype=float), X)
    return float(out) if np.ndim(out) == 0 else out


def optimal_price_curve(params: MarketParams, T: float, x):
    """Optimal fluid price at adoption level ``x`` on the path started from zero.

    Vectorised over ``x``. The value at ``x = X*_T`` is exactly 1. Values can
    be negative when imitation dominates and ``x`` is small; they are returned
    as computed.
    """
    X = final_adoption(params, T, 0.0)
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0) or np.any(x_arr > X * (1 + 1e-12) + 1e-15):
        raise ParameterError(f"price curve is defined on [0, {X}] only")
    x_arr = np.minimum(x_arr, X)
    out = _log_ratio_price(params.alpha, params.beta, x_arr, X)
    return float(out) if out.ndim == 0 else out


def optimal_policy_price(params: MarketParams, x: float, T_rem: float) -> float:
    """Optimal fluid price at state ``x`` with ``T_rem`` time left."""
    if not 0 <= x < 1:
        raise ParameterError(f"adoption must lie in [0, 1), got {x}")
    if not T_rem > 0:
        raise ParameterError(f"remaining time must be positive, got {T_rem}")
    X = final_adoption(params, T_rem, x)
    return float(_log_ratio_price(params.alpha, params.beta, x, X))


def _int_log_affine(alpha, beta, a, b):
    # integral of log(alpha + beta u) over [a, b], stable as beta -> 0
    def F(u):
        z = beta * u / alpha
        if abs(z) < 1e-4:
            phi = z / 2 - z * z / 6 + z ** 3 / 12
        else:
            phi = ((1 + z) * math.log1p(z) - z) / z
        return u * phi

    return (b - a) * math.log(alpha) + F(b) - F(a)


def _int_log_one_minus(a, b):
    # integral of log(1 - u) over [a, b]
    def F(u):
        return -(1 - u) * math.log1p(-u) - u

    return F(b) - F(a)


def det_value(params: MarketParams, x: float, T: float) -> float:
    """Optimal fluid revenue from adoption level ``x`` with ``T`` time left."""
    if not 0 <= x < 1:
        raise ParameterError(f"adoption must lie in [0, 1), got {x}")
    if T < 0:
        raise ParameterError(f"remaining time must be nonnegative, got {T}")
    if T == 0:
        return 0.0
    alpha, beta = params.alpha, params.beta
    X = final_adoption(params, T, x)
    if X <= x:
        return 0.0
    g_end = adoption_potential(alpha, beta, X)
    total = ((1.0 - math.log(g_end)) * (X - x)
             + _int_log_affine(alpha, beta, x, X)
             + _int_log_one_minus(x, X))
    return params.m * total


def price_upper_bound(params: MarketParams, T: float) -> float:
    """Ceiling ``log(e + (alpha + beta) T)`` on every optimal fluid price."""
    return math.log(E + (params.alpha + params.beta) * T)


def lipschitz_bounds(params: MarketParams) -> tuple[float, Optional[float]]:
    """Ceilings on |dp*/dalpha| and |dp*/dbeta|; the latter is None when beta = 0."""
    alpha, beta = params.alpha, params.beta
    l_alpha = (2 + beta / alpha) / alpha
    l_beta = 3.0 / min(alpha, beta) if beta > 0 else None
    return l_alpha, l_beta


def segment_time(params: MarketParams, p: float, x1: float, x2: float) -> float:
    """Fluid time to move adoption from ``x1`` to ``x2`` at constant price ``p``."""
    if not 0 <= x1 <= x2 < 1:
        raise ParameterError(f"need 0 <= x1 <= x2 < 1, got {x1}, {x2}")
    alpha, beta = params.alpha, params.beta
    dx = x2 - x1
    logs = math.log1p(beta * dx / (alpha + beta * x1)) + math.log1p(dx / (1.0 - x2))
    return math.exp(p) / (alpha + beta) * logs


def segment_advance(params: MarketParams, p: float, x1: float, duration: float) -> float:
    """Inverse of :func:`segment_time`: adoption after ``duration`` at price ``p``."""
    if not 0 <= x1 < 1:
        raise ParameterError(f"adoption must lie in [0, 1), got {x1}")
    if duration < 0:
        raise ParameterError("duration must be nonnegative")
    alpha, beta = params.alpha, params.beta
    k = (alpha + beta) * duration * math.exp(-p)
    head = alpha + beta * x1
    num = head * math.expm1(k) + (alpha + beta) * x1
    den = head * math.exp(k) + beta * (1.0 - x1)
    if not math.isfinite(den):
        return _X_CEIL
    return min(max(num / den, x1), _X_CEIL)


@dataclass(frozen=True)
class FluidSegment:
    p: float
    x_start: float
    x_end: float
    duration: float


@dataclass
class FluidTrajectory:
    m: int
    segments: list = field(default_factory=list)

    @property
    def total_time(self) -> float:
        return sum(s.duration for s in self.segments)

    @property
    def total_revenue(self) -> float:
        return self.m * sum(s.p * (s.x_end - s.x_start) for s in self.segments)

    @property
    def x_end(self) -> float:
        return self.segments[-1].x_end if self.segments else float("nan")


def fluid_simulate(params: MarketParams, T: float,
                   prices: Sequence[tuple[float, float]],
                   stop_at: Optional[float] = None) -> FluidTrajectory:
    """Run the fluid model under a price schedule indexed by adoption level.

    ``prices`` holds ``(breakpoint, price)`` pairs; each price applies from its
    breakpoint up to the next one and the last price holds until the clock
    reaches ``T`` (or adoption reaches ``stop_at``). The first breakpoint is
    the starting adoption level.
    """
    if len(prices) == 0:
        raise ParameterError("price schedule is empty")
    if T < 0:
        raise ParameterError("horizon must be nonnegative")
    breaks = [float(b) for b, _ in prices]
    levels = [float(p) for _, p in prices]
    if any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
        raise ParameterError("breakpoints must be strictly increasing")
    if breaks[0] < 0 or breaks[-1] >= 1:
        raise ParameterError("breakpoints must lie in [0, 1)")
    if any(not (p >= 0 and math.isfinite(p)) for p in levels):
        raise ParameterError("prices must be finite and nonnegative")
    if stop_at is not None:
        breaks.append(stop_at)

    traj = FluidTrajectory(m=params.m)
    x, t = breaks[0], 0.0
    if T == 0:
        traj.segments.append(FluidSegment(levels[0], x, x, 0.0))
        return traj
    for j, p in enumerate(levels):
        x_next = breaks[j + 1] if j + 1 < len(breaks) else None
        if x_next is not None:
            dt = segment_time(params, p, x, x_next)
            if t + dt < T:
                traj.segments.append(FluidSegment(p, x, x_next, dt))
                x, t = x_next, t + dt
                continue
        x_end = segment_advance(params, p, x, T - t)
        if x_next is not None:
            x_end = min(x_end, x_next)
        traj.segments.append(FluidSegment(p, x, x_end, T - t))
        return traj
    return traj


def disadvantage(params: MarketParams, x: float, T_rem: float, p: float) -> float:
    """Rate of optimal-value loss from posting ``p`` instead of the optimal price."""
    pi = optimal_policy_price(params, x, T_rem)
    u = p - pi
    if abs(u) < 1e-3:
        f = u * u * (0.5 + u * (1 / 6 + u * (1 / 24 + u / 120)))
    else:
        f = math.expm1(u) - u
    return arrival_rate(params, p, x) * f
