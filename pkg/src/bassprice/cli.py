"""Command-line entry point: ``bassprice <subcommand> [--config FILE] [--key value ...]``.

Every config key has a matching flag (``--p-explore`` for ``p_explore``).
Flags override values read from ``--config``. Exit status is 0 on success,
2 on a configuration error and 1 on a runtime fault.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from .config import COMMANDS, ConfigError, RunConfig, config_load, parse_value
from .core import MarketParams, ParameterError
from .experiments import (TwoMarketInstance, binomial_slack, coverage_experiment,
                          distinguishability_experiment, price_gap_experiment,
                          regret_sweep, stoch_value_dp)
from .fluid import (det_value, final_adoption, optimal_policy_price, optimal_price_curve,
                    price_upper_bound)
from .policies import PolicyConfig, make_policy
from .simulate import pseudo_regret, simulate, write_trace_csv

log = logging.getLogger("bassprice")

ECHO_NAME = "config.echo"
TIMING_NAME = "timing.txt"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(v):
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    raise TypeError(f"not JSON serialisable: {type(v).__name__}")


def _instance(cfg: RunConfig) -> dict:
    return {"alpha": cfg.alpha, "beta": cfg.beta, "phi": cfg.phi, "T": cfg.horizon,
            "delta": cfg.delta, "seed_base": cfg.seed}


def _single_m(cfg: RunConfig) -> int:
    if len(cfg.m) != 1:
        raise ConfigError(f"{cfg.command} takes a single m value, got {len(cfg.m)}")
    return cfg.m[0]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def run_simulate(cfg: RunConfig, out: Path) -> dict:
    m = _single_m(cfg)
    params = MarketParams(m, cfg.alpha, cfg.beta, cfg.phi)
    pcfg = PolicyConfig(m, cfg.horizon, cfg.phi, cfg.delta, cfg.p_explore, cfg.radius_scale)
    policy = make_policy(pcfg, cfg.policy, alpha=cfg.alpha, beta=cfg.beta, price=cfg.fixed_price)
    rows = []
    for r in range(cfg.replicates):
        seed = cfg.seed + r
        trace = simulate(params, cfg.horizon, policy, seed)
        write_trace_csv(trace, out / "traces" / f"trace_seed{seed}.csv")
        if cfg.policy == "algorithm1":
            write_csv(out / "estimates" / f"estimates_seed{seed}.csv",
                      ["epoch", "gamma_i", "alpha_hat", "A", "beta_hat", "B_i"],
                      [[s["epoch"], s["gamma_i"], s["alpha_hat"], s["A"], s["beta_hat"], s["B_i"]]
                       for s in policy.snapshots])
        rows.append([seed, trace.d_T, trace.revenue, pseudo_regret(trace, params, cfg.horizon)])
    write_csv(out / "report.csv", ["seed", "d_T", "revenue", "pseudo_regret"], rows)
    regs = np.array([r[3] for r in rows])
    return {"instance": {**_instance(cfg), "m": m, "policy": cfg.policy},
            "statistics": {"replicates": cfg.replicates,
                           "det_value": det_value(params, 0.0, cfg.horizon),
                           "pseudo_regret_mean": float(regs.mean()),
                           "mean_d_T": float(np.mean([r[1] for r in rows]))},
            "checks": {}}


def curve_rows(params: MarketParams, T: float, points: int) -> list:
    """Rows (x, p_star, pi_star, remaining_time) along the optimal fluid path."""
    X = final_adoption(params, T)
    rows = []
    for x in np.linspace(0.0, X, points):
        x = float(x)
        # adoption runs at the constant rate X / T along the optimal path
        t_rem = T * (1.0 - x / X) if X > 0 else T
        p = optimal_price_curve(params, T, x)
        pi = optimal_policy_price(params, x, t_rem) if t_rem > 0 and x < 1 else 1.0
        rows.append([x, p, pi, max(t_rem, 0.0)])
    return rows


def run_optimal_curve(cfg: RunConfig, out: Path) -> dict:
    params = MarketParams(1, cfg.alpha, cfg.beta, cfg.phi)
    rows = curve_rows(params, cfg.horizon, cfg.points)
    header = ["x", "p_star", "pi_star", "remaining_time"]
    write_csv(out / "curve.csv", header, rows)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return {"instance": _instance(cfg),
            "statistics": {"X_star": final_adoption(params, cfg.horizon),
                           "price_cap": price_upper_bound(params, cfg.horizon)},
            "checks": {"price_cap": all(r[1] <= price_upper_bound(params, cfg.horizon) + 1e-12
                                        for r in rows)}}


def run_regret_sweep(cfg: RunConfig, out: Path) -> dict:
    rep = regret_sweep(cfg.m, cfg.alpha, cfg.beta, phi=cfg.phi, T=cfg.horizon, kind=cfg.policy,
                       replicates=cfg.replicates, seed_base=cfg.seed, delta=cfg.delta,
                       p_explore=cfg.p_explore, radius_scale=cfg.radius_scale)
    cols = ["m", "replicates", "mean", "std", "q05", "q50", "q95", "certified"]
    write_csv(out / "report.csv", cols, [[getattr(c, k) for k in cols] for c in rep.cells])
    with open(out / "loglog.dat", "w") as fh:
        fh.write("# m mean_pseudo_regret\n")
        for c in rep.cells:
            fh.write(f"{c.m} {c.mean:.17g}\n")
    checks = {}
    if rep.slope is not None:
        if cfg.policy == "algorithm1":
            checks["slope_window"] = cfg.tol_slope_min <= rep.slope <= cfg.tol_slope_max
        elif cfg.policy == "oracle":
            checks["oracle_slope"] = rep.slope <= cfg.tol_oracle_slope_max
    summary = rep.summary()
    return {"instance": {**_instance(cfg), "policy": cfg.policy, "m": list(cfg.m)},
            "statistics": {"cells": summary["cells"], "slope": summary["slope"],
                           "slope_ci": summary["slope_ci"]},
            "checks": checks, "wall_clock": rep.wall_clock}


def run_coverage(cfg: RunConfig, out: Path) -> dict:
    m = _single_m(cfg)
    params = MarketParams(m, cfg.alpha, cfg.beta, cfg.phi)
    cov = coverage_experiment(params, cfg.horizon, cfg.delta, cfg.replicates, cfg.seed,
                              cfg.p_explore, cfg.radius_scale)
    R = cfg.replicates
    rows = [["alpha", 0, cov["alpha"], cov["alpha_n"]]]
    rows += [["beta", i, f, R] for i, f in sorted(cov["beta"].items())]
    rows += [["lcb", i, f, cov["lcb_n"][i]] for i, f in sorted(cov["lcb"].items())]
    rows.append(["adoption", 0, cov["adoption"], R])
    write_csv(out / "report.csv", ["event", "epoch", "frequency", "count"], rows)
    target = 1.0 - cfg.delta
    lcb_target = 1.0 - 2.0 * cfg.delta
    checks = {
        "alpha_coverage": cov["alpha"] >= target - binomial_slack(target, R),
        "beta_coverage": all(f >= target - binomial_slack(target, R) for f in cov["beta"].values()),
        "lcb_ordering": all(f >= lcb_target - binomial_slack(lcb_target, cov["lcb_n"][i])
                            for i, f in cov["lcb"].items()),
        "adoption_shortfall": cov["adoption"] >= cov["adoption_target"]
        - binomial_slack(cov["adoption_target"], R),
    }
    return {"instance": {**_instance(cfg), "m": m, "certified": cov["certified"]},
            "statistics": cov, "checks": checks}


def run_lower_bound_lab(cfg: RunConfig, out: Path) -> dict:
    m = _single_m(cfg)
    hard = TwoMarketInstance.hardest(cfg.alpha, cfg.beta, m)
    eps = hard.eps if cfg.eps is None else cfg.eps
    n = hard.n if cfg.budget is None else cfg.budget
    inst = TwoMarketInstance(cfg.alpha, cfg.beta, eps, n, m)
    gap_rows = price_gap_experiment(cfg.alpha, cfg.beta, eps, cfg.horizon,
                                    points=cfg.points, slack=cfg.tol_derivative_slack)
    res = distinguishability_experiment(inst, cfg.replicates, cfg.seed)
    write_csv(out / "price_gap.csv", ["x", "pi_base", "pi_perturbed", "gap", "bound", "ok"],
              [[r[k] for k in ("x", "pi_base", "pi_perturbed", "gap", "bound", "ok")]
               for r in gap_rows])
    write_csv(out / "report.csv", ["quantity", "value"], sorted(res.items()))
    se_wrong = math.sqrt(0.25 * 0.75 / cfg.replicates)
    checks = {
        "kl_budget": res["llr_mean"] <= res["kl_bound"] * (1.0 + cfg.tol_kl_slack),
        "decision_rule_limit": max(res["wrong_base"], res["wrong_perturbed"]) >= 0.25 - 3 * se_wrong,
        "probability_gap": abs(res["acceptance_diff"])
        <= res["probability_gap_bound"] + 3 * res["acceptance_diff_se"],
        "price_gap": all(r["ok"] for r in gap_rows),
    }
    return {"instance": {**_instance(cfg), "m": m, "eps": eps, "n": n},
            "statistics": res, "checks": checks}


def run_dp_oracle(cfg: RunConfig, out: Path) -> dict:
    m = _single_m(cfg)
    params = MarketParams(m, cfg.alpha, cfg.beta, cfg.phi)
    grid = np.linspace(0.0, price_upper_bound(params, cfg.horizon), cfg.dp_prices)
    v_dp = stoch_value_dp(params, cfg.horizon, cfg.dp_steps, grid)
    v_det = det_value(params, 0.0, cfg.horizon)
    write_csv(out / "report.csv", ["m", "det_value", "stoch_value_dp"], [[m, v_det, v_dp]])
    return {"instance": {**_instance(cfg), "m": m, "dp_steps": cfg.dp_steps,
                         "dp_prices": cfg.dp_prices},
            "statistics": {"det_value": v_det, "stoch_value_dp": v_dp},
            "checks": {"benchmark_ordering": v_det >= v_dp - 1e-6}}


HANDLERS = {
    "simulate": run_simulate,
    "optimal-curve": run_optimal_curve,
    "regret-sweep": run_regret_sweep,
    "coverage": run_coverage,
    "lower-bound-lab": run_lower_bound_lab,
    "dp-oracle": run_dp_oracle,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    for f in fields(RunConfig):
        if f.name == "command":
            continue
        dashed = "--" + f.name.replace("_", "-")
        names = [dashed] if dashed == "--" + f.name else [dashed, "--" + f.name]
        p.add_argument(*names, dest=f.name, default=None, metavar="VALUE")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bassprice",
                                     description="Dynamic pricing under Bass diffusion demand.")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}")
    for name in COMMANDS:
        _add_config_flags(sub.add_parser(name))
    return parser


def load_run_config(args: argparse.Namespace) -> RunConfig:
    overrides = {"command": args.command}
    for f in fields(RunConfig):
        raw = getattr(args, f.name, None)
        if f.name != "command" and raw is not None:
            overrides[f.name] = parse_value(f.name, raw)
    return config_load(args.config, overrides)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr,
                        format="warning: %(message)s", force=True)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg = load_run_config(args)
    except (ConfigError, ParameterError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.output_dir)
    t0 = time.perf_counter()
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / ECHO_NAME).write_text(cfg.echo())
        summary = HANDLERS[cfg.command](cfg, out)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # any other failure is a runtime fault
        print(f"runtime fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    wall = summary.pop("wall_clock", time.perf_counter() - t0)
    summary["command"] = cfg.command
    write_json(out / "summary.json", summary)
    (out / TIMING_NAME).write_text(f"wall_clock_seconds {wall:.6f}\n")
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
