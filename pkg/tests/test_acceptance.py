"""Acceptance criteria, each run at its stated tolerance.

Every test records a PASS/FAIL line that pytest prints in its terminal
summary under "acceptance criteria". Heavy Monte Carlo runs use all CPUs
unless BASSPRICE_THREADS is set.
"""
import math
import os
import time

import numpy as np
import pytest
from scipy import integrate

from bassprice import experiments as ex
from bassprice.cli import main
from bassprice.core import MarketParams
from bassprice.experiments import binomial_slack
from bassprice.fluid import (E, det_value, final_adoption, lipschitz_bounds, optimal_price_curve,
                             price_upper_bound, raw_price_curve)

ALPHA, BETA = 0.3, 0.5
T_HARD = ex.lower_bound_horizon(ALPHA, BETA)


@pytest.fixture(scope="module", autouse=True)
def _threads():
    old = os.environ.get(ex.THREADS_ENV)
    if old is None:
        os.environ[ex.THREADS_ENV] = str(os.cpu_count() or 1)
    yield
    if old is None:
        os.environ.pop(ex.THREADS_ENV, None)


def _params(a, b, m=1):
    return MarketParams(m, a, b, a + b)


# ---------------------------------------------------------------- 1

def _closed_form_failures(a, b, T, m):
    fails = []
    params = _params(a, b)
    X = final_adoption(params, T)
    if abs(X - (a + b * X) * (1 - X) * T / E) > 1e-10 * (1 + X):
        fails.append("quadratic")
    xs = np.linspace(0, X, 1000)
    cap = price_upper_bound(params, T)
    if np.max(optimal_price_curve(params, T, xs)) > cap + 1e-12:
        fails.append("cap")
    # central differences in alpha and beta on a grid inside both perturbed domains
    l_alpha, l_beta = lipschitz_bounds(params)
    h = 1e-6
    shifted = [(_params(a + h, b), _params(a - h, b))]
    if b > 2 * h:
        shifted.append((_params(a, b + h), _params(a, b - h)))
    x_top = min(final_adoption(p, T) for pair in shifted for p in pair)
    xg = np.linspace(0, min(X, x_top), 50)
    for (up, down), bound in zip(shifted, [l_alpha, l_beta]):
        deriv = np.abs(raw_price_curve(up, T, xg) - raw_price_curve(down, T, xg)) / (2 * h)
        if np.max(deriv) > bound:
            fails.append("lipschitz")
    pm = _params(a, b, m)
    n = math.floor(m * X)
    if n > 0:
        total = math.fsum(optimal_price_curve(pm, T, np.arange(n) / m))
        integral = m * integrate.quad(lambda u: optimal_price_curve(pm, T, u), 0, n / m,
                                      epsabs=0, epsrel=1e-12, limit=200)[0]
        bound = n / (2 * m) * (b / a) + 0.5 * math.log(m) + 2 * cap
        if abs(total - integral) > bound:
            fails.append("discretization")
    return fails


def test_criterion_1_closed_form_suite(record_criterion):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    failures = []
    for _ in range(500):
        a, b, T = rng.uniform(0.05, 2), rng.uniform(0, 2), rng.uniform(0.1, 20)
        m = int(rng.integers(10, 20_001))
        failures += [(a, b, T, f) for f in _closed_form_failures(a, b, T, m)]
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 10
    record_criterion("criterion 1 closed-form suite", ok,
                     f"500 instances, {len(failures)} failures, {elapsed:.1f}s (limit 10s)")
    assert not failures, failures[:5]
    assert elapsed < 10


# ---------------------------------------------------------------- 2

def test_criterion_2_concavity(record_criterion):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = -math.inf
    for _ in range(200):
        params = _params(rng.uniform(0.05, 2), rng.uniform(0, 2))
        T = rng.uniform(0.1, 20)
        xs = np.linspace(0, 0.99, 100)
        v = np.array([det_value(params, x, T) for x in xs])
        worst = max(worst, float(np.max(v[:-2] - 2 * v[1:-1] + v[2:])))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-7 and elapsed < 10
    record_criterion("criterion 2 concavity", ok,
                     f"max second difference {worst:.3g} (limit 1e-7), {elapsed:.1f}s")
    assert worst <= 1e-7
    assert elapsed < 10


# ---------------------------------------------------------------- 3

def test_criterion_3_benchmark_ordering(record_criterion):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    gaps = []
    for _ in range(20):
        a, b = rng.uniform(0.05, 1), rng.uniform(0, 1)
        params = _params(a, b, int(rng.integers(1, 21)))
        T = rng.uniform(0.2, 20)
        gaps.append(det_value(params, 0.0, T) - ex.stoch_value_dp(params, T, K=2000))
    elapsed = time.perf_counter() - t0
    ok = min(gaps) >= -1e-6 and elapsed < 120
    record_criterion("criterion 3 benchmark ordering", ok,
                     f"min det - dp = {min(gaps):.3g} over 20 instances, {elapsed:.1f}s")
    assert min(gaps) >= -1e-6
    assert elapsed < 120


# ---------------------------------------------------------------- 4 and 5

@pytest.fixture(scope="module")
def coverage_runs():
    t0 = time.perf_counter()
    cov = ex.coverage_experiment(MarketParams(10 ** 6, ALPHA, BETA), T_HARD, delta=0.1,
                                 replicates=2000, seed_base=0)
    return cov, time.perf_counter() - t0


def test_criterion_4_estimator_coverage(coverage_runs, record_criterion):
    cov, elapsed = coverage_runs
    lowest_beta = min(cov["beta"].values())
    ok = cov["alpha"] >= 0.88 and lowest_beta >= 0.88 and elapsed < 900
    record_criterion("criterion 4 estimator coverage", ok,
                     f"A {cov['alpha']:.4f}, min B_i {lowest_beta:.4f} over epochs "
                     f"{sorted(cov['beta'])} (limit 0.88), certified={cov['certified']}, "
                     f"{elapsed:.0f}s")
    assert cov["alpha"] >= 0.88
    assert lowest_beta >= 0.88
    assert elapsed < 900


def test_criterion_5_lcb_ordering_and_adoption(coverage_runs, record_criterion):
    cov, _ = coverage_runs
    target = 1 - 2 * 0.1
    lcb_ok = {i: f >= target - binomial_slack(target, cov["lcb_n"][i]) for i, f in cov["lcb"].items()}
    a_target = cov["adoption_target"]
    adopt_ok = cov["adoption"] >= a_target - binomial_slack(a_target, cov["replicates"])
    ok = bool(lcb_ok) and all(lcb_ok.values()) and adopt_ok
    record_criterion("criterion 5 LCB ordering and adoption", ok,
                     f"LCB per epoch {dict((i, round(f, 4)) for i, f in cov['lcb'].items())} "
                     f"(target {target}), adoption {cov['adoption']:.4f} (target {a_target:.3f})")
    assert lcb_ok and all(lcb_ok.values())
    assert adopt_ok


# ---------------------------------------------------------------- 6

GRID = [10 ** 4, 10 ** 5, 10 ** 6]


def test_criterion_6_regret_scaling(record_criterion):
    t0 = time.perf_counter()
    learn = ex.regret_sweep(GRID, ALPHA, BETA, T=T_HARD, kind="algorithm1", replicates=100)
    oracle = ex.regret_sweep(GRID, ALPHA, BETA, T=T_HARD, kind="oracle", replicates=100)
    elapsed = time.perf_counter() - t0
    learn_ok = 0.5 <= learn.slope <= 0.85
    oracle_ok = oracle.slope <= 0.6
    ok = learn_ok and oracle_ok and elapsed < 3600
    record_criterion("criterion 6 regret scaling", ok,
                     f"algorithm slope {learn.slope:.3f} (window [0.5, 0.85]), "
                     f"oracle slope {oracle.slope:.3f} (limit 0.6), "
                     f"means {[round(c.mean, 1) for c in learn.cells]}, {elapsed:.0f}s")
    assert learn_ok, f"algorithm slope {learn.slope}"
    assert oracle_ok, f"oracle slope {oracle.slope}"
    assert elapsed < 3600


def test_diagnostic_slope_without_confidence_radii(record_criterion):
    rep = ex.regret_sweep(GRID, ALPHA, BETA, T=T_HARD, kind="algorithm1", replicates=100,
                          radius_scale=0.0)
    record_criterion("diagnostic (not a criterion) radius_scale=0", True,
                     f"algorithm slope {rep.slope:.3f}, CI {tuple(round(v, 3) for v in rep.slope_ci)}")
    assert math.isfinite(rep.slope)


# ---------------------------------------------------------------- 7

def test_criterion_7_lower_bound_lab(record_criterion):
    t0 = time.perf_counter()
    inst = ex.TwoMarketInstance.hardest(ALPHA, BETA, 10 ** 5)
    R = 2000
    res = ex.distinguishability_experiment(inst, replicates=R, seed_base=0)
    kl_ok = res["llr_mean"] <= res["kl_bound"] * 1.1
    worst = max(res["wrong_base"], res["wrong_perturbed"])
    rule_ok = worst >= 0.25 - binomial_slack(0.25, R)
    T_min = (1 + math.sqrt(2)) * E / (ALPHA + BETA)
    gap_rows = [r for T in (T_min, T_HARD, 4 * T_min)
                for r in ex.price_gap_experiment(ALPHA, BETA, inst.eps, T, points=50, slack=0.05)]
    gap_ok = all(r["ok"] for r in gap_rows)
    elapsed = time.perf_counter() - t0
    ok = kl_ok and rule_ok and gap_ok and elapsed < 600
    record_criterion("criterion 7 lower-bound lab", ok,
                     f"LLR mean {res['llr_mean']:.4f} vs bound {res['kl_bound']:.4f}, "
                     f"wrong-side {res['wrong_base']:.3f}/{res['wrong_perturbed']:.3f}, "
                     f"price gap {sum(r['ok'] for r in gap_rows)}/{len(gap_rows)}, {elapsed:.0f}s")
    assert kl_ok and rule_ok and gap_ok
    assert elapsed < 600


# ---------------------------------------------------------------- 8

def test_criterion_8_disadvantage_decomposition(record_criterion):
    rng = np.random.default_rng(8)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        a, b = rng.uniform(0.05, 2), rng.uniform(0, 2)
        params = _params(a, b, int(rng.integers(1, 10 ** 6)))
        T = rng.uniform(0.1, 20)
        k = int(rng.integers(1, 7))
        breaks = np.concatenate(([0.0], np.sort(rng.uniform(0, 0.95, k - 1))))
        schedule = [(float(x), float(rng.uniform(0, price_upper_bound(params, T))))
                    for x in breaks]
        lost, integral = ex.disadvantage_decomposition(params, T, schedule)
        worst = max(worst, abs(lost - integral) / max(abs(lost), 1e-12 * params.m))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 30
    record_criterion("criterion 8 disadvantage decomposition", ok,
                     f"max relative mismatch {worst:.2e} over 50 paths, {elapsed:.1f}s")
    assert worst <= 1e-6
    assert elapsed < 30


# ---------------------------------------------------------------- 9

RUNS = [
    ["simulate", "--alpha", "0.3", "--beta", "0.5", "--m", "20000", "--seed", "42",
     "--replicates", "3", "--radius-scale", "0"],
    ["simulate", "--alpha", "0.3", "--beta", "0.5", "--m", "20000", "--seed", "7",
     "--policy", "oracle"],
    ["regret-sweep", "--alpha", "0.3", "--beta", "0.5", "--m", "1000,4000,16000",
     "--replicates", "5"],
    ["coverage", "--alpha", "0.3", "--beta", "0.5", "--m", "10000", "--replicates", "5"],
    ["lower-bound-lab", "--alpha", "0.3", "--beta", "0.5", "--m", "100000",
     "--replicates", "20", "--points", "5"],
    ["dp-oracle", "--alpha", "0.5", "--beta", "0.5", "--m", "8", "--dp-steps", "300"],
    ["optimal-curve", "--alpha", "0.5", "--beta", "0.5", "--points", "11"],
]


def _snapshot(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file() and p.name != "timing.txt"}


def test_criterion_9_determinism(tmp_path, monkeypatch, record_criterion, capsys):
    mismatched, compared = [], 0
    for k, argv in enumerate(RUNS):
        snaps = []
        for rep in ("first", "second"):
            work = tmp_path / rep / str(k)
            work.mkdir(parents=True)
            monkeypatch.chdir(work)
            assert main(argv + ["--output-dir", "run"]) == 0
            snaps.append(_snapshot(work / "run"))
        compared += len(snaps[0])
        if snaps[0] != snaps[1]:
            mismatched.append(argv[0])
    capsys.readouterr()
    ok = not mismatched
    record_criterion("criterion 9 determinism", ok,
                     f"{compared} files across {len(RUNS)} command runs, mismatches {mismatched}")
    assert ok
