"""Flat YAML configuration files.

Every key sits at the top level of a single document::

    # network
    n_risky: 1
    alpha: 0.6
    alpha_low: 0.2
    alpha_high: 1.2
    q_ll: 0.5
    q_hh: 0.5
    p_h: 0.8
    p_l: 0.3
    delta_ell: 2.0
    rho: 0.99
    # initial state; scalars are broadcast over the risky paths
    ell0: 10.0
    ell_risky: 10.0
    belief: 0.1
    # planner
    planner_horizon: 8
    terminal_value: zero
    # experiment
    seed: 7

Network keys are all required when any subcommand needs a network.  Every
other key has a default (see ``PLANNER_DEFAULTS`` and ``ExperimentParams``).
Unknown keys are rejected so that typos never pass silently.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Any, Mapping, Optional

import yaml

from .model import LATENCY_LIMIT, NetworkConfig, SystemState
from .planner import TERMINAL_MODES, PlannerConfig

NETWORK_KEYS = ("n_risky", "alpha", "alpha_low", "alpha_high", "q_ll", "q_hh",
                "p_h", "p_l", "delta_ell", "rho")

# config key -> PlannerConfig field
PLANNER_KEYS = {
    "planner_horizon": "horizon",
    "terminal_value": "terminal_value_mode",
    "bisection_tol": "bisection_tol",
    "bracket_cap": "bracket_cap",
    "node_cap": "node_cap",
}
PLANNER_DEFAULTS = {k: getattr(PlannerConfig(), f) for k, f in PLANNER_KEYS.items()}

MODES = ("belief", "truth")
POLICY_NAMES = ("myopic", "optimal", "hiding", "sid")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class ExperimentParams:
    horizon: int = 300
    runs: int = 50
    seed: Optional[int] = None
    mode: str = "belief"
    policy: str = "myopic"
    policies: tuple[str, ...] = ("myopic", "sid")
    n_risky_values: Optional[tuple[int, ...]] = None
    ell0: Optional[float] = None
    ell_risky: Optional[tuple[float, ...]] = None
    belief: Optional[tuple[float, ...]] = None
    latency_limit: float = LATENCY_LIMIT
    tail: float = 1e-6
    epsilon: Optional[float] = None
    ell1_values: tuple[float, ...] = (1e2, 1e3, 1e4, 1e5)
    rho_values: Optional[tuple[float, ...]] = None
    x_min: float = 0.0
    x_max: float = 1.0
    x_points: int = 21
    grid_resolution: float = 0.05
    crossing_tol: float = 1e-4


EXPERIMENT_KEYS = tuple(f.name for f in fields(ExperimentParams))
ALL_KEYS = NETWORK_KEYS + tuple(PLANNER_KEYS) + EXPERIMENT_KEYS


def _number(key: str, v: Any) -> float:
    if isinstance(v, str):
        # YAML 1.1 reads exponents without a sign, such as 1e300, as strings
        try:
            v = float(v)
        except ValueError:
            raise ConfigError(key, f"expected a number, got {v!r}") from None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, f"expected a number, got {v!r}")
    v = float(v)
    if math.isnan(v):
        raise ConfigError(key, "NaN is not allowed")
    return v


def _integer(key: str, v: Any, low: Optional[int] = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        if isinstance(v, float) and v.is_integer():
            v = int(v)
        else:
            raise ConfigError(key, f"expected an integer, got {v!r}")
    if low is not None and v < low:
        raise ConfigError(key, f"must be >= {low}, got {v}")
    return v


def _numbers(key: str, v: Any) -> tuple[float, ...]:
    items = v if isinstance(v, (list, tuple)) else [v]
    if not items:
        raise ConfigError(key, "must not be empty")
    return tuple(_number(key, x) for x in items)


def _choice(key: str, v: Any, allowed: tuple[str, ...]) -> str:
    if v not in allowed:
        raise ConfigError(key, f"must be one of {list(allowed)}, got {v!r}")
    return v


def _network(raw: Mapping[str, Any]) -> NetworkConfig:
    for key in NETWORK_KEYS:
        if key not in raw:
            raise ConfigError(key, "missing required key")
    vals = {k: _number(k, raw[k]) for k in NETWORK_KEYS}
    vals["n_risky"] = _integer("n_risky", raw["n_risky"], 1)
    try:
        return NetworkConfig(**vals)
    except ValueError as exc:
        msg = str(exc)
        if msg.startswith("alpha ordering"):
            key = "alpha"
        else:
            key = next((k for k in sorted(NETWORK_KEYS, key=len, reverse=True)
                        if msg.startswith(k)), "network")
        raise ConfigError(key, msg) from None


def _planner(raw: Mapping[str, Any]) -> PlannerConfig:
    kw = {}
    if "planner_horizon" in raw:
        kw["horizon"] = _integer("planner_horizon", raw["planner_horizon"], 1)
    if "terminal_value" in raw:
        kw["terminal_value_mode"] = _choice("terminal_value", raw["terminal_value"],
                                            TERMINAL_MODES)
    for key in ("bisection_tol", "bracket_cap"):
        if key in raw:
            v = _number(key, raw[key])
            if not v > 0:
                raise ConfigError(key, f"must be > 0, got {v!r}")
            kw[key] = v
    if "node_cap" in raw:
        kw["node_cap"] = _integer("node_cap", raw["node_cap"], 1)
    return PlannerConfig(**kw)


def _probabilities(key: str, v: Any) -> tuple[float, ...]:
    xs = _numbers(key, v)
    for x in xs:
        if not 0.0 <= x <= 1.0:
            raise ConfigError(key, f"must lie in [0, 1], got {x!r}")
    return xs


def _experiment(raw: Mapping[str, Any]) -> ExperimentParams:
    kw: dict[str, Any] = {}
    for key in ("horizon", "runs", "x_points"):
        if key in raw:
            kw[key] = _integer(key, raw[key], 2 if key == "x_points" else 1)
    if raw.get("seed") is not None:
        kw["seed"] = _integer("seed", raw["seed"], 0)
    if "mode" in raw:
        kw["mode"] = _choice("mode", raw["mode"], MODES)
    if "policy" in raw:
        kw["policy"] = _choice("policy", raw["policy"], POLICY_NAMES)
    if "policies" in raw:
        items = raw["policies"] if isinstance(raw["policies"], list) else [raw["policies"]]
        kw["policies"] = tuple(_choice("policies", p, POLICY_NAMES) for p in items)
    if raw.get("n_risky_values") is not None:
        items = raw["n_risky_values"]
        items = items if isinstance(items, list) else [items]
        kw["n_risky_values"] = tuple(_integer("n_risky_values", n, 1) for n in items)
    if raw.get("ell0") is not None:
        kw["ell0"] = _number("ell0", raw["ell0"])
    if raw.get("ell_risky") is not None:
        kw["ell_risky"] = _numbers("ell_risky", raw["ell_risky"])
    if raw.get("belief") is not None:
        kw["belief"] = _probabilities("belief", raw["belief"])
    for key in ("latency_limit", "tail", "grid_resolution", "crossing_tol"):
        if key in raw:
            v = _number(key, raw[key])
            if not v > 0:
                raise ConfigError(key, f"must be > 0, got {v!r}")
            kw[key] = v
    if raw.get("epsilon") is not None:
        v = _number("epsilon", raw["epsilon"])
        if not 0.0 < v < 1.0:
            raise ConfigError("epsilon", f"must lie in (0, 1), got {v!r}")
        kw["epsilon"] = v
    if "ell1_values" in raw:
        kw["ell1_values"] = _numbers("ell1_values", raw["ell1_values"])
    if raw.get("rho_values") is not None:
        rhos = _numbers("rho_values", raw["rho_values"])
        for r in rhos:
            if not 0.0 <= r < 1.0:
                raise ConfigError("rho_values", f"must lie in [0, 1), got {r!r}")
        kw["rho_values"] = rhos
    for key in ("x_min", "x_max"):
        if key in raw:
            kw[key] = _probabilities(key, raw[key])[0]
    p = ExperimentParams(**kw)
    if p.x_min >= p.x_max:
        raise ConfigError("x_max", "must be greater than x_min")
    return p


@dataclass(frozen=True)
class RunConfig:
    network: Optional[NetworkConfig]
    planner: PlannerConfig
    experiment: ExperimentParams

    def initial_state(self, n_risky: Optional[int] = None) -> SystemState:
        """Initial state, broadcasting scalar ``ell_risky`` / ``belief`` entries."""
        if self.network is None:
            raise ConfigError("n_risky", "a network is required")
        n = self.network.n_risky if n_risky is None else n_risky
        e = self.experiment
        for key in ("ell0", "ell_risky", "belief"):
            if getattr(e, key) is None:
                raise ConfigError(key, "missing required key")

        def spread(key: str, vals: tuple[float, ...]) -> tuple[float, ...]:
            if len(vals) == 1:
                return vals * n
            if len(vals) != n:
                raise ConfigError(key, f"has {len(vals)} entries for {n} risky paths")
            return vals

        return SystemState(e.ell0, spread("ell_risky", e.ell_risky),
                           spread("belief", e.belief))

    def to_dict(self) -> dict[str, Any]:
        """Fully resolved flat mapping; feeding it back through
        :func:`from_mapping` gives an equal configuration."""
        out: dict[str, Any] = {}
        if self.network is not None:
            out.update({k: getattr(self.network, k) for k in NETWORK_KEYS})
        out.update({k: getattr(self.planner, f) for k, f in PLANNER_KEYS.items()})
        for k, v in asdict(self.experiment).items():
            out[k] = list(v) if isinstance(v, tuple) else v
        return out


def from_mapping(raw: Mapping[str, Any], require_network: bool = True) -> RunConfig:
    if not isinstance(raw, Mapping):
        raise ConfigError("<document>", "expected a mapping of flat keys")
    for key in raw:
        if key not in ALL_KEYS:
            raise ConfigError(str(key), "unknown key")
    exp = _experiment(raw)
    pcfg = _planner(raw)
    has_net = any(k in raw for k in NETWORK_KEYS)
    net = _network(raw) if (require_network or has_net) else None
    return RunConfig(net, pcfg, exp)


def parse_config(text: str, require_network: bool = True) -> RunConfig:
    """Parse and validate a flat YAML document."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<document>", f"not valid YAML: {exc}") from None
    return from_mapping({} if raw is None else raw, require_network)
