"""Flat ``key = value`` run configuration with validation and a lossless echo."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .experiments import lower_bound_horizon


class ConfigError(ValueError):
    pass


COMMANDS = ("simulate", "optimal-curve", "regret-sweep", "coverage", "lower-bound-lab", "dp-oracle")
POLICIES = ("algorithm1", "oracle", "max-price", "fixed-price", "explore-only")


@dataclass
class RunConfig:
    command: Optional[str] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    phi: float = 1.0
    m: list = field(default_factory=lambda: [10000])
    horizon: Optional[float] = None
    policy: str = "algorithm1"
    delta: float = 0.1
    p_explore: float = 0.0
    fixed_price: float = 1.0
    radius_scale: float = 1.0
    replicates: int = 1
    seed: int = 0
    output_dir: str = "runs/latest"
    points: int = 101
    dp_steps: int = 2000
    dp_prices: int = 200
    eps: Optional[float] = None
    budget: Optional[int] = None
    tol_derivative_slack: float = 0.05
    tol_kl_slack: float = 0.1
    tol_slope_min: float = 0.5
    tol_slope_max: float = 0.85
    tol_oracle_slope_max: float = 0.6

    @property
    def T(self) -> float:
        return self.horizon

    def validate(self) -> "RunConfig":
        """Check every field and materialise the horizon default."""
        if self.command is not None and self.command not in COMMANDS:
            raise ConfigError(f"command must be one of {', '.join(COMMANDS)}")
        if self.alpha is None or self.beta is None:
            raise ConfigError("alpha and beta are required")
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if not self.beta >= 0:
            raise ConfigError("beta must be nonnegative")
        if not self.phi > 0:
            raise ConfigError("phi must be positive")
        if self.alpha + self.beta > self.phi * (1 + 1e-9):
            raise ConfigError("alpha + beta must not exceed phi")
        if not self.m or any(int(v) != v or v < 1 for v in self.m):
            raise ConfigError("m must be a list of positive integers")
        if self.horizon is None:
            self.horizon = lower_bound_horizon(self.alpha, self.beta)
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ConfigError("horizon must be positive and finite")
        if self.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {', '.join(POLICIES)}")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0,1)")
        cap = math.log(math.e + self.phi * self.horizon)
        if not 0 <= self.p_explore <= cap:
            raise ConfigError(f"p_explore must lie in [0, {cap!r}]")
        if not self.fixed_price >= 0:
            raise ConfigError("fixed_price must be nonnegative")
        if not self.radius_scale >= 0:
            raise ConfigError("radius_scale must be nonnegative")
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.points < 2:
            raise ConfigError("points must be at least 2")
        if not 1 <= self.dp_steps <= 2000:
            raise ConfigError("dp_steps must lie in [1, 2000]")
        if self.dp_prices < 2:
            raise ConfigError("dp_prices must be at least 2")
        if self.eps is not None and not self.eps >= 0:
            raise ConfigError("eps must be nonnegative")
        if self.budget is not None and self.budget < 1:
            raise ConfigError("budget must be a positive integer")
        if self.command in ("simulate", "regret-sweep", "coverage") and min(self.m) < 8:
            raise ConfigError("m must be at least 8 for simulation commands")
        if self.command == "dp-oracle" and max(self.m) > 50:
            raise ConfigError("m must be at most 50 for dp-oracle")
        return self

    def echo(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            lines.append(f"{f.name} = {_format(v)}")
        return "\n".join(lines) + "\n"


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _format(v) -> str:
    if isinstance(v, list):
        return ", ".join(str(int(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_int(key, text):
    try:
        f = float(text)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {text!r}") from None
    if not f.is_integer():
        raise ConfigError(f"{key} must be an integer, got {text!r}")
    return int(f)


def parse_value(key: str, text: str):
    if key not in _TYPES:
        raise ConfigError(f"unknown key {key!r}")
    kind = _TYPES[key]
    text = text.strip()
    if key == "m":
        return [_parse_int(key, t) for t in text.replace(",", " ").split()]
    if "int" in kind:
        return _parse_int(key, text)
    if "float" in kind:
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {text!r}") from None
    return text


def parse_config(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        try:
            values[key] = parse_value(key, val)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return values


def config_load(path, overrides: Optional[dict] = None) -> RunConfig:
    """Read a config file, apply overrides (e.g. CLI flags) and validate."""
    values = parse_config(Path(path).read_text()) if path is not None else {}
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig(**values).validate()
