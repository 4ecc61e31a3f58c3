"""Monte Carlo harnesses: regret scaling, estimator coverage, a small-market
dynamic-programming benchmark, and the two-market lower-bound laboratory.

Replicate ``r`` always uses seed ``seed_base + r``; results are reduced in
(cell, replicate) order so running replicates in parallel changes nothing.
"""
from __future__ import annotations

import logging
import math
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy import integrate, optimize

from .core import MarketParams, ParameterError, adoption_potential
from .fluid import (E, det_value, disadvantage, final_adoption, fluid_simulate,
                    optimal_policy_price, price_upper_bound, raw_price_curve,
                    segment_time)
from .policies import Algorithm1Policy, PolicyConfig, make_policy
from .simulate import simulate

log = logging.getLogger(__name__)

THREADS_ENV = "BASSPRICE_THREADS"


def lower_bound_horizon(alpha: float, beta: float) -> float:
    """Default horizon 2(1 + sqrt 2) e / (alpha + beta), where instances are hardest."""
    return 2.0 * (1.0 + math.sqrt(2.0)) * E / (alpha + beta)


def n_jobs() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _map(fn, items):
    jobs = n_jobs()
    if jobs == 1:
        return [fn(it) for it in items]
    return Parallel(n_jobs=jobs)(delayed(fn)(it) for it in items)


# ---------------------------------------------------------------------------
# regret scaling
# ---------------------------------------------------------------------------

@dataclass
class CellStats:
    m: int
    replicates: int
    mean: float
    std: float
    q05: float
    q50: float
    q95: float
    certified: bool


@dataclass
class ExperimentReport:
    kind: str
    alpha: float
    beta: float
    phi: float
    T: float
    delta: float
    seed_base: int
    cells: list = field(default_factory=list)
    slope: Optional[float] = None
    slope_ci: Optional[tuple] = None
    coverage: dict = field(default_factory=dict)
    wall_clock: float = 0.0

    def summary(self) -> dict:
        """JSON-ready summary; wall-clock is left out so reruns are byte-equal."""
        return {
            "kind": self.kind, "alpha": self.alpha, "beta": self.beta, "phi": self.phi,
            "T": self.T, "delta": self.delta, "seed_base": self.seed_base,
            "cells": [vars(c) for c in self.cells],
            "slope": self.slope,
            "slope_ci": list(self.slope_ci) if self.slope_ci else None,
            "coverage": self.coverage,
        }


def binomial_slack(target: float, n: int, z: float = 3.0) -> float:
    """Monte Carlo allowance of ``z`` standard errors for a frequency near ``target``."""
    q = min(max(target, 0.0), 1.0)
    return z * math.sqrt(q * (1.0 - q) / n)


def certified_regime(m: int, alpha: float, beta: float, delta: float) -> bool:
    """Whether m is large enough for the estimator error radii to be guaranteed."""
    need = 64.0 * ((alpha + beta) / alpha) ** 2 * math.sqrt(8.0 * math.log(2.0 / delta))
    return m ** (1.0 / 3.0) >= need


def fit_loglog_slope(ms: Sequence[float], samples: Sequence[np.ndarray],
                     n_boot: int = 1000, seed: int = 0) -> tuple[float, tuple[float, float]]:
    """OLS slope of log(mean) on log(m) with a replicate-bootstrap 95% interval."""
    logm = np.log(np.asarray(ms, dtype=float))
    means = np.array([np.mean(s) for s in samples])
    if np.any(means <= 0):
        raise ParameterError("log-log fit needs positive means")
    slope = float(np.polyfit(logm, np.log(means), 1)[0])
    rng = np.random.default_rng(seed)
    boots = []
    for _ in range(n_boot):
        bm = np.array([np.mean(rng.choice(s, size=len(s))) for s in samples])
        if np.all(bm > 0):
            boots.append(np.polyfit(logm, np.log(bm), 1)[0])
    lo, hi = np.percentile(boots, [2.5, 97.5]) if boots else (float("nan"),) * 2
    return slope, (float(lo), float(hi))


def _pseudo_regret_one(args):
    params, T, cfg, kind, seed = args
    policy = make_policy(cfg, kind, alpha=params.alpha, beta=params.beta)
    trace = simulate(params, T, policy, seed)
    return trace.revenue


def regret_sweep(m_values: Sequence[int], alpha: float, beta: float, *,
                 phi: float = 1.0, T: Optional[float] = None, kind: str = "algorithm1",
                 replicates: int = 100, seed_base: int = 0, delta: float = 0.1,
                 p_explore: float = 0.0, radius_scale: float = 1.0) -> ExperimentReport:
    """Mean pseudo-regret per market size and its fitted log-log slope."""
    T = lower_bound_horizon(alpha, beta) if T is None else T
    if replicates < 1:
        raise ParameterError("replicates must be at least 1")
    t0 = time.perf_counter()
    report = ExperimentReport(kind, alpha, beta, phi, T, delta, seed_base)
    samples = []
    for m in m_values:
        params = MarketParams(m, alpha, beta, phi)
        cfg = PolicyConfig(m, T, phi, delta, p_explore, radius_scale)
        v = det_value(params, 0.0, T)
        revs = _map(_pseudo_regret_one,
                    [(params, T, cfg, kind, seed_base + r) for r in range(replicates)])
        regs = v - np.asarray(revs)
        samples.append(regs)
        q05, q50, q95 = np.quantile(regs, [0.05, 0.5, 0.95])
        report.cells.append(CellStats(int(m), replicates, float(regs.mean()),
                                      float(regs.std(ddof=1)) if replicates > 1 else 0.0,
                                      float(q05), float(q50), float(q95),
                                      certified_regime(m, alpha, beta, delta)))
    if len(set(m_values)) >= 3:
        report.slope, report.slope_ci = fit_loglog_slope(m_values, samples, seed=seed_base)
    else:
        log.warning("slope needs at least 3 distinct market sizes; got %d", len(set(m_values)))
    report.wall_clock = time.perf_counter() - t0
    return report


# ---------------------------------------------------------------------------
# estimator coverage
# ---------------------------------------------------------------------------

def adoption_floor(m: int, X: float, delta: float) -> float:
    return m * X - math.sqrt(8.0 * m * X * math.log(4.0 / delta))


def _coverage_one(args):
    params, T, cfg, seed = args
    policy = Algorithm1Policy(cfg)
    trace = simulate(params, T, policy, seed)
    m = params.m
    X = final_adoption(params, T)
    out = {"alpha": None, "beta": {}, "lcb": {}, "d_T": trace.d_T,
           "adoption": trace.d_T >= adoption_floor(m, X, cfg.delta)}
    if policy.state is not None:
        out["alpha"] = abs(policy.state.alpha_hat - params.alpha) <= policy.state.A
    for snap in policy.snapshots:
        i = snap["epoch"]
        out["beta"][i] = abs(snap["beta_hat"] - params.beta) <= snap["B_i"]
        # the true curve only exists up to floor(m X*) customers
        lo, hi = snap["priced_from"], min(snap["priced_to"], trace.d_T, math.floor(m * X) + 1)
        if hi >= lo:
            c = np.arange(lo, hi + 1)
            p_true = raw_price_curve(params, T, (c - 1) / m)
            out["lcb"][i] = bool(np.all(trace.prices[c - 1] <= p_true + 1e-12))
    return out


def coverage_experiment(params: MarketParams, T: float, delta: float = 0.1,
                        replicates: int = 2000, seed_base: int = 0,
                        p_explore: float = 0.0, radius_scale: float = 1.0) -> dict:
    """Empirical frequencies of the estimator, LCB-ordering and adoption events."""
    cfg = PolicyConfig(params.m, T, params.phi, delta, p_explore, radius_scale)
    runs = _map(_coverage_one, [(params, T, cfg, seed_base + r) for r in range(replicates)])

    def freq(vals):
        vals = [v for v in vals if v is not None]
        return (float(np.mean(vals)) if vals else float("nan")), len(vals)

    alpha_f, alpha_n = freq([r["alpha"] for r in runs])
    epochs = sorted({i for r in runs for i in r["beta"]})
    beta_f = {i: freq([r["beta"].get(i) for r in runs]) for i in epochs}
    lcb_f = {i: freq([r["lcb"].get(i) for r in runs]) for i in epochs}
    adopt_f, _ = freq([r["adoption"] for r in runs])
    return {
        "m": params.m, "delta": delta, "replicates": replicates,
        "certified": certified_regime(params.m, params.alpha, params.beta, delta),
        "alpha": alpha_f, "alpha_n": alpha_n,
        "beta": {i: f for i, (f, _) in beta_f.items()},
        "lcb": {i: f for i, (f, n) in lcb_f.items() if n},
        "lcb_n": {i: n for i, (_, n) in lcb_f.items()},
        "adoption": adopt_f,
        "adoption_target": 1.0 - delta * math.log(params.m),
        "mean_d_T": float(np.mean([r["d_T"] for r in runs])),
    }


# ---------------------------------------------------------------------------
# small-market dynamic programme
# ---------------------------------------------------------------------------

def stoch_value_dp(params: MarketParams, T: float, K: int = 2000,
                   prices: Optional[Sequence[float]] = None) -> float:
    """Backward induction for the optimal expected revenue of a tiny market.

    Time is cut into ``K`` steps of length ``T / K``; in each step at most one
    customer arrives, with probability ``min(1, rate * dt)``.
    """
    m = params.m
    if m > 50:
        raise ParameterError("the DP benchmark is limited to m <= 50")
    if K < 1 or K > 2000:
        raise ParameterError("K must lie in [1, 2000]")
    if T < 0:
        raise ParameterError("T must be nonnegative")
    if T == 0:
        return 0.0
    if prices is None:
        prices = np.linspace(0.0, price_upper_bound(params, T), 200)
    grid = np.asarray(prices, dtype=float)
    dt = T / K
    d = np.arange(m)
    # q[d, j]: arrival probability in one step at state d and price j
    rate = m * np.exp(-grid)[None, :] * adoption_potential(params.alpha, params.beta, d / m)[:, None]
    q = np.minimum(rate * dt, 1.0)
    V = np.zeros(m + 1)
    for _ in range(K):
        stay = V[:-1, None]
        move = V[1:, None]
        V_new = np.empty_like(V)
        V_new[:-1] = np.max(stay + q * (grid[None, :] + move - stay), axis=1)
        V_new[-1] = 0.0
        V = V_new
    return float(V[0])


# ---------------------------------------------------------------------------
# lower-bound laboratory
# ---------------------------------------------------------------------------

def kl_exponential(rate1: float, rate0: float) -> float:
    """log(rate0 / rate1) + rate1 / rate0 - 1, i.e. KL(Exp(rate0) || Exp(rate1))."""
    if not (rate1 > 0 and rate0 > 0):
        raise ParameterError("rates must be positive")
    r = rate1 / rate0
    return r - 1.0 - math.log(r)


@dataclass(frozen=True)
class TwoMarketInstance:
    alpha: float
    beta: float
    eps: float
    n: int
    m: int

    @classmethod
    def hardest(cls, alpha: float, beta: float, m: int) -> "TwoMarketInstance":
        """Perturbation and sample size used by the lower-bound construction."""
        eps = (alpha + beta) ** 2 / alpha
        n = math.floor((alpha / (alpha + beta)) ** (4.0 / 3.0) * m ** (2.0 / 3.0))
        return cls(alpha, beta, eps, n, m)

    def markets(self) -> tuple[MarketParams, MarketParams]:
        big = self.alpha + self.beta + self.eps
        return (MarketParams(self.m, self.alpha, self.beta, big),
                MarketParams(self.m, self.alpha, self.beta + self.eps, big))

    def kl_bound(self) -> float:
        return self.n * (self.eps * self.n / self.m) ** 2 / (2.0 * self.alpha ** 2)

    def kl_exact(self, prices=None) -> float:
        """Joint KL(perturbed || base) of the first ``n`` inter-arrivals at the given prices.

        This is the mean of the log-likelihood ratio under the perturbed market.
        """
        x = np.arange(self.n) / self.m
        p = np.zeros(self.n) if prices is None else np.asarray(prices)
        base = np.exp(-p) * adoption_potential(self.alpha, self.beta, x)
        pert = np.exp(-p) * adoption_potential(self.alpha, self.beta + self.eps, x)
        r = base / pert
        return float(np.sum(r - 1.0 - np.log(r)))

    def probability_gap_bound(self) -> float:
        return self.eps * self.n ** 1.5 / (2.0 * self.alpha * self.m)


def mle_beta(inter_arrivals, prices, alpha: float, m: int) -> float:
    """Maximum-likelihood imitation coefficient with the innovation rate known.

    The score is decreasing in beta, so the root is bracketed and found by
    Brent's method; the result is clipped to beta >= 0.
    """
    I = np.asarray(inter_arrivals, dtype=float)
    x = np.arange(I.size) / m
    w = m * np.exp(-np.asarray(prices, dtype=float)) * (1.0 - x) * I

    def score(b):
        return float(np.sum(x / (alpha + b * x)) - np.sum(w * x))

    if score(0.0) <= 0:
        return 0.0
    hi = 1.0
    while score(hi) > 0:
        hi *= 2.0
        if hi > 1e12:
            return hi
    return optimize.brentq(score, 0.0, hi, xtol=1e-14, rtol=1e-12)


def plug_in_rule(alpha: float, x: float, T_rem: float) -> Callable:
    """Decision rule: estimate beta by MLE, output the optimal price for the estimate."""
    def rule(inter_arrivals, prices, m):
        b = mle_beta(inter_arrivals, prices, alpha, m)
        params = MarketParams(m, alpha, b, alpha + b)
        return optimal_policy_price(params, x, T_rem)
    return rule


def _zero_policy(n: int):
    class _Zero:
        def next_price(self, history):
            return 0.0

        def price_block(self, history):
            return np.zeros(n - history.d)
    return _Zero()


def _distinguish_one(args):
    inst, rule, pi1, pi2, seed = args
    out = []
    for market in inst.markets():
        trace = simulate(market, math.inf, _zero_policy(inst.n), seed, max_customers=inst.n)
        gaps = np.diff(np.concatenate(([0.0], trace.arrival_times)))
        pi = rule(gaps, trace.prices, inst.m)
        closer_to_first = abs(pi - pi1) < abs(pi - pi2)
        # log-likelihood ratio of perturbed vs base market on this sample
        x = np.arange(inst.n) / inst.m
        lam0 = inst.m * np.exp(-trace.prices) * adoption_potential(inst.alpha, inst.beta, x)
        lam1 = inst.m * np.exp(-trace.prices) * adoption_potential(inst.alpha, inst.beta + inst.eps, x)
        llr = float(np.sum(np.log(lam1 / lam0) - (lam1 - lam0) * gaps))
        out.append((closer_to_first, llr))
    return out


def distinguishability_experiment(inst: TwoMarketInstance, replicates: int = 2000,
                                  seed_base: int = 0, rule: Optional[Callable] = None,
                                  x: Optional[float] = None, T_rem: Optional[float] = None) -> dict:
    """Misclassification frequencies of a pricing decision made after ``n`` observations.

    Both markets are driven by the same exploration price 0 and the same
    seeds. The decision is judged against the optimal prices of the two
    markets at adoption level ``x`` (default ``n/m``) and remaining time
    ``T_rem`` (default the lower-bound horizon of the base market).
    """
    if inst.eps > 0 and inst.n ** 1.5 > inst.alpha * inst.m / inst.eps * (1 + 1e-9):
        raise ParameterError("customer budget exceeds (alpha m / eps)^(2/3)")
    if not 1 <= inst.n < inst.m:
        raise ParameterError("need 1 <= n < m")
    x = inst.n / inst.m if x is None else x
    T_rem = lower_bound_horizon(inst.alpha, inst.beta) if T_rem is None else T_rem
    base, pert = inst.markets()
    pi1 = optimal_policy_price(base, x, T_rem)
    pi2 = optimal_policy_price(pert, x, T_rem)
    rule = plug_in_rule(inst.alpha, x, T_rem) if rule is None else rule
    runs = _map(_distinguish_one, [(inst, rule, pi1, pi2, seed_base + r) for r in range(replicates)])
    first = np.array([[r[0][0], r[1][0]] for r in runs], dtype=float)
    llr = np.array([r[1][1] for r in runs])
    p_base, p_pert = first.mean(axis=0)
    diff = p_base - p_pert
    se = math.sqrt((p_base * (1 - p_base) + p_pert * (1 - p_pert)) / replicates)
    return {
        "n": inst.n, "m": inst.m, "eps": inst.eps, "replicates": replicates,
        "pi_base": pi1, "pi_perturbed": pi2,
        "wrong_base": 1.0 - p_base,   # base market, decision closer to the other price
        "wrong_perturbed": p_pert,
        "acceptance_diff": diff, "acceptance_diff_se": se,
        "probability_gap_bound": inst.probability_gap_bound(),
        "kl_bound": inst.kl_bound(), "kl_exact": inst.kl_exact(),
        "llr_mean": float(llr.mean()), "llr_se": float(llr.std(ddof=1) / math.sqrt(replicates)),
    }


def price_gap_bound(alpha: float, beta: float, eps: float, T: float) -> float:
    return eps * alpha * E / (4.0 * (alpha + beta + eps) ** 3 * T)


def price_gap_experiment(alpha: float, beta: float, eps: float, T: float,
                         points: int = 50, slack: float = 0.05) -> list[dict]:
    """Optimal-policy price gap between the base and beta-perturbed markets.

    The x-grid spans ``[0, alpha^2 e / (4 (alpha + beta)^3 T)]``.
    """
    if T < (1.0 + math.sqrt(2.0)) * E / (alpha + beta):
        raise ParameterError("horizon is outside the regime T >= (1 + sqrt 2) e / (alpha + beta)")
    base = MarketParams(1, alpha, beta, alpha + beta + eps)
    pert = MarketParams(1, alpha, beta + eps, alpha + beta + eps)
    x_max = alpha ** 2 * E / (4.0 * (alpha + beta) ** 3 * T)
    bound = price_gap_bound(alpha, beta, eps, T)
    rows = []
    for x in np.linspace(0.0, x_max, points):
        a = optimal_policy_price(base, float(x), T)
        b = optimal_policy_price(pert, float(x), T)
        gap = a - b
        rows.append({"x": float(x), "pi_base": a, "pi_perturbed": b, "gap": gap,
                     "bound": bound, "ok": gap >= bound * (1.0 - slack)})
    return rows


# ---------------------------------------------------------------------------
# fluid decomposition of value loss into instantaneous disadvantages
# ---------------------------------------------------------------------------

def disadvantage_integral(params: MarketParams, T: float, trajectory) -> float:
    """Integral over time of the disadvantage along a fluid trajectory.

    Integrates in adoption level: dt = m dx / rate, so the integrand reduces
    to m (e^{p - pi*} - 1 - (p - pi*)).
    """
    total = 0.0
    t0 = 0.0
    for seg in trajectory.segments:
        if seg.x_end <= seg.x_start:
            t0 += seg.duration
            continue

        def integrand(x, seg=seg, t0=t0):
            t = t0 + segment_time(params, seg.p, seg.x_start, x)
            T_rem = T - t
            if T_rem <= 0:
                return 0.0
            rate = params.m * math.exp(-seg.p) * adoption_potential(params.alpha, params.beta, x)
            return disadvantage(params, x, T_rem, seg.p) * params.m / rate

        val, _ = integrate.quad(integrand, seg.x_start, seg.x_end,
                                epsabs=0.0, epsrel=1e-12, limit=200)
        total += val
        t0 += seg.duration
    return total


def disadvantage_decomposition(params: MarketParams, T: float, schedule) -> tuple[float, float]:
    """Return (value lost along a price path, integrated disadvantage)."""
    traj = fluid_simulate(params, T, schedule)
    t_end = traj.total_time
    lost = (det_value(params, 0.0 if not schedule else schedule[0][0], T)
            - traj.total_revenue
            - det_value(params, traj.x_end, max(T - t_end, 0.0)))
    return lost, disadvantage_integral(params, T, traj)
