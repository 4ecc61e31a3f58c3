"""Exact event-driven simulation of the stochastic Bass market.

Prices only change at arrival events, so every inter-arrival time is
exponential with the rate frozen at the previous arrival. Inter-arrivals are
drawn by inverse transform from a PCG64 stream, one uniform per customer in
customer order, which keeps traces bit-identical whether a policy quotes one
price at a time or commits to a block of prices.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol

import numpy as np

from .core import MarketParams, adoption_potential
from .fluid import det_value


class PolicyFault(RuntimeError):
    """A policy quoted a negative or non-finite price."""


@dataclass
class History:
    """What a policy may look at: the past only."""

    arrival_times: np.ndarray
    prices: np.ndarray
    d: int
    m: int
    T: float


class Policy(Protocol):
    def next_price(self, history: History) -> float:
        ...


@dataclass
class SimTrace:
    arrival_times: np.ndarray
    prices: np.ndarray
    revenue: float
    d_T: int
    seed: int

    def to_csv(self, path) -> None:
        write_trace_csv(self, path)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _quote(policy, history: History) -> np.ndarray:
    block = getattr(policy, "price_block", None)
    prices = block(history) if block is not None else None
    if prices is None:
        prices = [policy.next_price(history)]
    prices = np.asarray(prices, dtype=float).ravel()
    if prices.size == 0:
        raise PolicyFault("policy returned an empty price block")
    if not np.all(np.isfinite(prices)) or np.any(prices < 0):
        bad = prices[~(np.isfinite(prices) & (prices >= 0))][0]
        raise PolicyFault(f"policy quoted an invalid price {bad!r} for customer {history.d + 1}")
    return prices


def simulate(params: MarketParams, T: float, policy, seed: int,
             max_customers: Optional[int] = None) -> SimTrace:
    """Simulate one selling season of length ``T`` under ``policy``.

    Policies implement ``next_price(history)``; they may also implement
    ``price_block(history)`` returning prices for the next several customers
    that do not depend on those customers' arrival times. ``reset()`` is
    called first when present. ``max_customers`` stops the run early, which
    the hypothesis-testing experiments use to observe a fixed sample size.
    """
    m = params.m
    cap = m if max_customers is None else min(m, max_customers)
    rng = make_rng(seed)
    if hasattr(policy, "reset"):
        policy.reset()
    times = np.empty(cap)
    prices = np.empty(cap)
    d, t = 0, 0.0
    while d < cap:
        history = History(times[:d], prices[:d], d, m, T)
        block = _quote(policy, history)[: cap - d]
        k = block.size
        u = rng.random(k)
        x = (d + np.arange(k)) / m
        with np.errstate(divide="ignore", over="ignore"):
            rate = m * np.exp(-block) * adoption_potential(params.alpha, params.beta, x)
            gaps = -np.log1p(-u) / rate
        arrivals = np.cumsum(np.concatenate(([t], gaps)))[1:]
        n_in = int(np.searchsorted(arrivals, T, side="right"))
        times[d:d + n_in] = arrivals[:n_in]
        prices[d:d + n_in] = block[:n_in]
        d += n_in
        if n_in < k:
            break
        t = arrivals[-1]
    times, prices = times[:d].copy(), prices[:d].copy()
    return SimTrace(times, prices, math.fsum(prices), d, seed)


def pseudo_regret(trace: SimTrace, params: MarketParams, T: float) -> float:
    """Optimal fluid revenue minus realised revenue; negative on lucky paths."""
    return det_value(params, 0.0, T) - trace.revenue


def write_trace_csv(trace: SimTrace, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["d", "tau", "price"])
        for i, (tau, p) in enumerate(zip(trace.arrival_times, trace.prices), start=1):
            w.writerow([i, f"{tau:.17g}", f"{p:.17g}"])


def read_trace_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        return np.empty(0), np.empty(0)
    return data[:, 1], data[:, 2]
