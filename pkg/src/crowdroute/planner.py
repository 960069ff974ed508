"""Socially optimal routing by finite-horizon expectimax over the belief MDP.

The safe action branches deterministically; a risky action branches on the
hazard report with probabilities from :func:`~crowdroute.model.hazard_probability`.
Values below the root are minimised with pruning (a branch whose immediate
latency already reaches the best value found cannot win, because all
continuation costs are non-negative); root Q-values are always computed in
full.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from . import _backend
from .model import NetworkConfig, SystemState
from .policies import myopic_route

TERMINAL_MODES = ("zero", "perpetuity")


class PlannerError(RuntimeError):
    """The requested search tree exceeds the configured node cap."""


class ThresholdBracketError(ValueError):
    """The cost gap changes sign in the wrong direction over the bracket."""


class ThresholdNumericalError(ArithmeticError):
    """The cost gap evaluated to NaN during bisection."""


@dataclass(frozen=True)
class PlannerConfig:
    horizon: int = 6
    terminal_value_mode: str = "zero"
    bisection_tol: float = 1e-6
    bracket_cap: float = 1e4
    node_cap: int = 20_000_000

    def __post_init__(self) -> None:
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"horizon must be an integer >= 1, got {self.horizon!r}")
        if self.terminal_value_mode not in TERMINAL_MODES:
            raise ValueError(f"terminal_value_mode must be one of {TERMINAL_MODES}")
        if not self.bisection_tol > 0:
            raise ValueError("bisection_tol must be > 0")
        if not self.bracket_cap > 0:
            raise ValueError("bracket_cap must be > 0")


@dataclass(frozen=True)
class PlanResult:
    cost: float
    action: int
    q_values: tuple[float, ...]
    nodes: int = 0


def _params(cfg: NetworkConfig) -> tuple:
    return (cfg.alpha, cfg.alpha_low, cfg.alpha_high, cfg.q_hh, cfg.q_lh,
            cfg.p_h, cfg.p_l, cfg.delta_ell, cfg.rho)


def tree_size(n_risky: int, horizon: int) -> int:
    """Worst-case node count of an unpruned tree with ``horizon`` decisions."""
    b = 2 * n_risky + 1
    return sum(b**k for k in range(horizon + 1))


def _check_size(n_risky: int, horizon: int, pcfg: PlannerConfig) -> None:
    size = tree_size(n_risky, horizon)
    if size > pcfg.node_cap:
        raise PlannerError(
            f"search tree for {n_risky} risky paths and horizon {horizon} has up to "
            f"{size} nodes (cap {pcfg.node_cap}); use a smaller horizon or fewer paths"
        )


def _kernel(backend: Optional[str]):
    if backend is None:
        return _backend.kernel
    try:
        return _backend.KERNELS[backend]
    except KeyError:
        raise ValueError(f"backend {backend!r} is not available") from None


def root_q_values(state: SystemState, cfg: NetworkConfig, pcfg: PlannerConfig,
                  backend: Optional[str] = None) -> tuple[list[float], int]:
    state.check(cfg)
    _check_size(cfg.n_risky, pcfg.horizon, pcfg)
    return _kernel(backend).root_q_values(
        pcfg.horizon, state.ell0, state.ell_risky, state.beliefs, _params(cfg),
        pcfg.terminal_value_mode == "perpetuity",
    )


def optimal_plan(state: SystemState, cfg: NetworkConfig, pcfg: PlannerConfig,
                 backend: Optional[str] = None) -> PlanResult:
    """Best action and its cost; ties go to path 0, then the lowest risky index."""
    qs, nodes = root_q_values(state, cfg, pcfg, backend)
    action = min(range(len(qs)), key=lambda a: (qs[a], a))
    return PlanResult(qs[action], action, tuple(qs), nodes)


def q_value(state: SystemState, action: int, cfg: NetworkConfig, pcfg: PlannerConfig,
            backend: Optional[str] = None) -> float:
    if not 0 <= action <= cfg.n_risky:
        raise ValueError(f"action {action!r} out of range 0..{cfg.n_risky}")
    return root_q_values(state, cfg, pcfg, backend)[0][action]


def state_value(state: SystemState, cfg: NetworkConfig, depth: int,
                terminal_value_mode: str = "zero", backend: Optional[str] = None) -> float:
    """Optimal cost with ``depth`` decisions remaining; depth 0 is the terminal value."""
    if terminal_value_mode not in TERMINAL_MODES:
        raise ValueError(f"terminal_value_mode must be one of {TERMINAL_MODES}")
    v, _ = _kernel(backend).state_value(
        depth, state.ell0, state.ell_risky, state.beliefs, _params(cfg),
        terminal_value_mode == "perpetuity",
    )
    return v


def make_planner(cfg: NetworkConfig, pcfg: PlannerConfig, cache: Optional[dict] = None,
                 backend: Optional[str] = None) -> Callable[[SystemState], PlanResult]:
    """Planner bound to one configuration, optionally memoised on the exact state."""

    def plan(state: SystemState) -> PlanResult:
        if cache is None:
            return optimal_plan(state, cfg, pcfg, backend)
        key = (cfg, pcfg, state.ell0, state.ell_risky, state.beliefs)
        hit = cache.get(key)
        if hit is None:
            hit = cache[key] = optimal_plan(state, cfg, pcfg, backend)
        return hit

    return plan


# -- thresholds --------------------------------------------------------------

def myopic_threshold(state: SystemState) -> float:
    """Myopic users leave path 0 once the best risky latency drops below this."""
    return state.ell0


def exploration_threshold(state: SystemState, path: int, cfg: NetworkConfig,
                          pcfg: PlannerConfig, probes: Optional[list] = None,
                          backend: Optional[str] = None) -> float:
    """Largest expected latency on ``path`` at which exploring it beats path 0.

    Bisects ``g(z) = Q_path(z) - Q_0(z)`` on ``[0, bracket_cap]`` where ``z``
    replaces the path's expected latency.  Returns ``bracket_cap`` when
    exploring wins everywhere and 0 when it never wins.  Each evaluated probe
    ``(state, q_values)`` is appended to ``probes`` when given.
    """
    if not 1 <= path <= cfg.n_risky:
        raise ValueError(f"path {path!r} is not a risky path")

    def gap(z: float) -> float:
        s = state.with_risky(path, ell=z)
        qs, _ = root_q_values(s, cfg, pcfg, backend)
        if probes is not None:
            probes.append((s, tuple(qs)))
        g = qs[path] - qs[0]
        if math.isnan(g):
            raise ThresholdNumericalError(f"cost gap is NaN at z={z!r}")
        return g

    lo, hi = 0.0, float(pcfg.bracket_cap)
    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo > 0 and g_hi > 0:
        return 0.0
    if g_lo < 0 and g_hi < 0:
        return hi
    if g_lo > 0 > g_hi:
        raise ThresholdBracketError(
            f"cost gap decreases across [0, {hi}] (g(0)={g_lo!r}, g(cap)={g_hi!r})"
        )
    while hi - lo > pcfg.bisection_tol:
        mid = 0.5 * (lo + hi)
        if gap(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class Crossing:
    """Where the optimal exploration threshold meets the myopic one.

    ``found`` is False when the difference keeps one sign over the grid.
    ``cell`` is the grid cell containing the flip; ``bracket`` is that cell
    narrowed by bisection.
    """

    found: bool
    x: float = math.nan
    cell: tuple[float, float] = (math.nan, math.nan)
    bracket: tuple[float, float] = (math.nan, math.nan)


def belief_crossing(cfg: NetworkConfig, template: SystemState, grid_resolution: float,
                    pcfg: PlannerConfig, xtol: float = 1e-4,
                    probes: Optional[list] = None,
                    backend: Optional[str] = None) -> Crossing:
    """Scan the path-1 belief for the crossing of optimal and myopic thresholds."""
    if template.n_risky != 1:
        raise ValueError("belief_crossing needs a single-risky-path template")
    if not grid_resolution > 0:
        raise ValueError("grid_resolution must be > 0")

    def diff(x: float) -> float:
        s = template.with_risky(1, belief=x)
        return exploration_threshold(s, 1, cfg, pcfg, probes, backend) - myopic_threshold(s)

    steps = max(1, int(round(1.0 / grid_resolution)))
    grid = [k / steps for k in range(steps + 1)]
    prev_x, prev_d = grid[0], diff(grid[0])
    for x in grid[1:]:
        d = diff(x)
        if prev_d == 0.0:
            return Crossing(True, prev_x, (prev_x, prev_x), (prev_x, prev_x))
        if (prev_d < 0) != (d < 0) or d == 0.0:
            lo, hi, d_lo = prev_x, x, prev_d
            while hi - lo > xtol:
                mid = 0.5 * (lo + hi)
                d_mid = diff(mid)
                if (d_mid < 0) == (d_lo < 0) and d_mid != 0.0:
                    lo, d_lo = mid, d_mid
                else:
                    hi = mid
            return Crossing(True, 0.5 * (lo + hi), (prev_x, x), (lo, hi))
        prev_x, prev_d = x, d
    return Crossing(False)


# -- checks on planner output --------------------------------------------------

def lemma2_holds(state: SystemState, plan: PlanResult, cfg: NetworkConfig) -> bool:
    """When the optimal and myopic actions differ, the optimal path's latency is
    at most the myopic path's latency divided by ``1 - rho``."""
    m = myopic_route(state)
    if plan.action == m:
        return True
    return state.latency(plan.action) <= state.latency(m) / (1.0 - cfg.rho)


def latency_upper_bound(state: SystemState, cfg: NetworkConfig, steps: int) -> float:
    """Bound on any path's expected latency after ``steps`` slots under any policy."""
    growth = max(cfg.alpha, cfg.alpha_high)
    b = max(state.ell0, *state.ell_risky)
    for _ in range(steps):
        b = growth * b + cfg.delta_ell
    return b

