"""Trajectory simulation, worst-case PoA constructions and Monte Carlo ratios."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import (
    LATENCY_LIMIT,
    HiddenTruth,
    NetworkConfig,
    Observation,
    SystemState,
    sample_observation,
    sample_truth,
    step_truth,
    transition,
)
from .planner import (
    PlannerConfig,
    exploration_threshold,
    make_planner,
    myopic_threshold,
)
from .policies import PolicyKind, PolicySpec, hiding_route, myopic_route, sid_route

# -- scenarios -----------------------------------------------------------------

def fig2_config(rho: float = 0.99) -> NetworkConfig:
    """Two-path network used for the threshold comparison."""
    return NetworkConfig(n_risky=1, alpha=0.6, alpha_low=0.2, alpha_high=1.2,
                         q_ll=0.5, q_hh=0.5, p_h=0.8, p_l=0.3, delta_ell=2.0, rho=rho)


def fig2_state(belief: float = 0.1) -> SystemState:
    return SystemState(10.0, (10.0,), (belief,))


def fig3_config(n_risky: int, alpha_high: float = 2.0, rho: float = 0.99) -> NetworkConfig:
    return NetworkConfig(n_risky=n_risky, alpha=0.99, alpha_low=0.0, alpha_high=alpha_high,
                         q_ll=0.99, q_hh=0.99, p_h=0.8, p_l=0.2, delta_ell=1.0, rho=rho)


#: Abandoned risky paths in the Fig. 3 setting keep growing while their belief
#: relaxes back to the stationary value; they level off near 1e19.
FIG3_LATENCY_LIMIT = 1e300


def fig3_state(n_risky: int) -> SystemState:
    return SystemState(100.0, (105.0,) * n_risky, (0.5,) * n_risky)


def myopic_worstcase_instance(epsilon: float = 2.0**-10, rho: float = 0.9,
                              p_limit: float = 1e-6, alpha_high: float = 4.0
                              ) -> tuple[NetworkConfig, SystemState]:
    """Two-path instance on which myopic users never leave path 0.

    Path 0 sits at its fixed point ``delta_ell / (1 - alpha)`` and path 1 at the
    same latency with belief ``1 / alpha_high``, the stationary belief, where
    its expected coefficient is exactly 1.  Larger ``alpha_high`` makes a
    single exploration more likely to reveal the low state.  Powers of two for
    ``epsilon`` and ``alpha_high`` keep every step exact in floating point.
    """
    x_bar = 1.0 / alpha_high
    cfg = NetworkConfig(n_risky=1, alpha=1.0 - epsilon, alpha_low=0.0, alpha_high=alpha_high,
                        q_ll=1.0 - epsilon, q_hh=1.0 - epsilon * (alpha_high - 1.0),
                        p_h=1.0 - p_limit, p_l=p_limit, delta_ell=1.0, rho=rho)
    ell = 1.0 / epsilon
    return cfg, SystemState(ell, (ell,), (x_bar,))


def hiding_worstcase_instance(ell1: float, rho: float = 0.9, delta_ell: float = 1.0,
                              epsilon: float = 1e-6) -> tuple[NetworkConfig, SystemState]:
    """Two-path instance where uninformed users always take path 1.

    Path 1 is absorbed in the low state with ``alpha_low = 0``, so its
    stationary belief is 0 and an uninformed user prefers it.
    """
    cfg = NetworkConfig(n_risky=1, alpha=1.0 - epsilon, alpha_low=0.0, alpha_high=2.0,
                        q_ll=1.0, q_hh=0.5, p_h=0.8, p_l=0.2, delta_ell=delta_ell, rho=rho)
    return cfg, SystemState(0.0, (ell1,), (0.0,))


# -- trajectories ----------------------------------------------------------------

@dataclass(frozen=True)
class TrajectoryStep:
    t: int
    state: SystemState
    action: int
    disclosed: bool
    observation: Observation
    latency: float


@dataclass
class TrajectoryRecord:
    policy: PolicySpec
    seed: object
    mode: str
    rho: float
    steps: list[TrajectoryStep] = field(default_factory=list)
    cost: float = 0.0

    @property
    def actions(self) -> list[int]:
        return [s.action for s in self.steps]

    @property
    def latencies(self) -> list[float]:
        return [s.latency for s in self.steps]


def run_rng(seed: int, run: int) -> np.random.Generator:
    """Random source of run ``run`` under master seed ``seed``."""
    return np.random.default_rng([int(seed), int(run)])


def run_trajectory(cfg: NetworkConfig, policy: PolicySpec, state: SystemState,
                   horizon: int, seed, mode: str = "belief",
                   planner_cache: Optional[dict] = None,
                   latency_limit: float = LATENCY_LIMIT) -> TrajectoryRecord:
    """Simulate ``horizon`` user arrivals from ``state`` under ``policy``.

    ``seed`` may be an int, a sequence of ints, or a ``numpy`` Generator.
    Deterministic for a fixed seed.
    """
    if int(horizon) != horizon or horizon < 1:
        raise ValueError(f"horizon must be an integer >= 1, got {horizon!r}")
    state.check(cfg)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    planner = None
    if policy.kind in (PolicyKind.SOCIAL_OPTIMAL, PolicyKind.SID):
        planner = make_planner(cfg, policy.planner, planner_cache)

    truth: Optional[HiddenTruth] = None
    if mode == "truth":
        truth = sample_truth(state.beliefs, rng)
    elif mode != "belief":
        raise ValueError(f"unknown mode {mode!r}")

    rec = TrajectoryRecord(policy, seed if not isinstance(seed, np.random.Generator) else None,
                           mode, cfg.rho)
    disc = 1.0
    for _ in range(int(horizon)):
        disclosed = False
        if policy.kind is PolicyKind.MYOPIC:
            action = myopic_route(state)
        elif policy.kind is PolicyKind.HIDING:
            action = hiding_route(cfg, rng)
        elif policy.kind is PolicyKind.SOCIAL_OPTIMAL:
            action = planner(state).action
        else:
            out = sid_route(state, cfg, planner)
            action, disclosed = out.action, out.disclosed
        lat = state.latency(action)
        rec.cost += disc * lat
        disc *= cfg.rho
        obs = sample_observation(state, action, cfg, rng, mode, truth)
        rec.steps.append(TrajectoryStep(state.t, state, action, disclosed, obs, lat))
        state = transition(state, action, obs, cfg, latency_limit)
        if truth is not None:
            truth = step_truth(truth, cfg, rng)
    return rec


def discounted_cost(record: TrajectoryRecord, rho: Optional[float] = None) -> float:
    rho = record.rho if rho is None else rho
    return math.fsum(rho**k * s.latency for k, s in enumerate(record.steps))


# -- worst-case constructions --------------------------------------------------

@dataclass(frozen=True)
class RatioReport:
    """Cost ratio of a construction together with the bound it is checked against.

    ``bound_kind`` is ``"lower"`` (ratio must reach ``slack * bound``),
    ``"upper"`` (ratio must not exceed ``bound``) or ``"match"`` (ratio within
    relative ``slack`` of ``bound``).
    """

    numerator: float
    denominator: float
    bound: float
    bound_formula: str
    bound_kind: str
    slack: float = 1.0
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.denominator > 0:
            raise ValueError("denominator cost must be > 0")

    @property
    def ratio(self) -> float:
        return self.numerator / self.denominator

    @property
    def satisfied(self) -> bool:
        if self.bound_kind == "lower":
            return self.ratio >= self.slack * self.bound
        if self.bound_kind == "upper":
            return self.ratio <= self.bound
        return abs(self.ratio / self.bound - 1.0) <= self.slack

    def as_dict(self) -> dict:
        return {
            "numerator": self.numerator,
            "denominator": self.denominator,
            "ratio": self.ratio,
            "bound": self.bound,
            "bound_formula": self.bound_formula,
            "bound_kind": self.bound_kind,
            "slack": self.slack,
            "satisfied": self.satisfied,
            "params": dict(self.params),
        }


def truncation_horizon(rho: float, tail: float = 1e-6) -> int:
    """Smallest ``T >= 1`` with ``rho**T < tail``."""
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho!r}")
    if rho == 0.0:
        return 1
    t = max(1, math.ceil(math.log(tail) / math.log(rho)))
    while rho**t >= tail:
        t += 1
    return t


def _geometric(rho: float, start: int, stop: int) -> float:
    """``sum(rho**k for k in range(start, stop))``."""
    return math.fsum(rho**k for k in range(start, stop))


def worstcase_myopic(rho: float, epsilon: float = 1e-3, tail: float = 1e-6) -> RatioReport:
    """Myopic users stuck on path 0 versus exploring path 1 once.

    Path 0 stays at ``l0 = delta_ell / epsilon``; exploring path 1 (same
    latency) finds a zero coefficient, after which every later user pays only
    ``delta_ell`` there.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho!r}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    t = truncation_horizon(rho, tail)
    d_ell = 1.0
    ell0 = d_ell / epsilon
    myopic = ell0 * _geometric(rho, 0, t)
    explore = ell0 + d_ell * _geometric(rho, 1, t)
    return RatioReport(myopic, explore, 1.0 / (1.0 - rho), "1/(1-rho)", "lower", 0.9,
                       {"rho": rho, "epsilon": epsilon, "truncation": t, "ell0": ell0,
                        "delta_ell": d_ell})


def worstcase_hiding(rho: float, ell1_values: Sequence[float], delta_ell: float = 1.0,
                     tail: float = 1e-6) -> list[RatioReport]:
    """Uninformed users always on path 1 versus one user exploiting path 0 first."""
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho!r}")
    t = truncation_horizon(rho, tail)
    reports = []
    for ell1 in ell1_values:
        hiding = ell1 + delta_ell * _geometric(rho, 1, t)
        optimal = delta_ell * _geometric(rho, 2, t)
        formula = (1.0 - rho) * ell1 / (rho**2 * delta_ell) + rho
        reports.append(RatioReport(
            hiding, optimal, formula, "(1-rho)*l1/(rho^2*dl)+rho", "match", 0.05,
            {"rho": rho, "ell1": ell1, "delta_ell": delta_ell, "truncation": t},
        ))
    return reports


def worstcase_sid(rho: float, epsilon: float = 1e-9, tail: float = 1e-6) -> RatioReport:
    """Disclosed users deviating to path 1 versus the exploit-first cost floor.

    Path 1 sits at ``l1 = delta_ell / (1 - 1/2)`` with expected coefficient 1/2
    and path 0 just below it at ``l1 - epsilon``.  Every user after the first
    pays at least ``l1 / 2`` under the optimum.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho!r}")
    t = truncation_horizon(rho, tail)
    d_ell = 1.0
    a_bar = 0.5
    ell1 = d_ell / (1.0 - a_bar)
    ell0 = ell1 - epsilon
    sid = ell1 * _geometric(rho, 0, t)
    floor = ell0 + 0.5 * ell1 * _geometric(rho, 1, t)
    return RatioReport(sid, floor, 1.0 / (1.0 - rho / 2.0), "1/(1-rho/2)", "upper", 1.0,
                       {"rho": rho, "epsilon": epsilon, "truncation": t, "ell0": ell0,
                        "ell1": ell1, "alpha_bar": a_bar})


# -- Monte Carlo inefficiency --------------------------------------------------

@dataclass(frozen=True)
class GammaEstimate:
    """Ratio of mean discounted costs of a policy and the optimum over paired runs."""

    ratio: float
    stderr: float
    runs: int
    policy_costs: tuple[float, ...]
    optimal_costs: tuple[float, ...]

    def as_dict(self) -> dict:
        return {"ratio": self.ratio, "stderr": self.stderr, "runs": self.runs}


def ratio_of_means(num: Sequence[float], den: Sequence[float]) -> tuple[float, float]:
    """Ratio of means with its delta-method standard error over paired samples."""
    a = np.asarray(num, dtype=float)
    b = np.asarray(den, dtype=float)
    n = len(a)
    mb = math.fsum(b) / n
    if mb <= 0:
        raise ValueError("mean optimal cost must be > 0")
    r = (math.fsum(a) / n) / mb
    if n < 2:
        return r, math.nan
    resid = a - r * b
    return r, float(np.std(resid, ddof=1) / (mb * math.sqrt(n)))


def paired_costs(cfg: NetworkConfig, policies: Sequence[PolicySpec], state: SystemState,
                 runs: int, horizon: int, seed: int, mode: str = "belief",
                 threads: int = 1, planner_cache: Optional[dict] = None,
                 latency_limit: float = LATENCY_LIMIT) -> list[list[float]]:
    """Discounted cost of every policy on every run; run ``k`` uses the same
    random source for all policies."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    cache = {} if planner_cache is None else planner_cache

    def one(run: int) -> list[float]:
        return [run_trajectory(cfg, p, state, horizon, run_rng(seed, run), mode, cache,
                               latency_limit).cost
                for p in policies]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_run = list(pool.map(one, range(runs)))
    else:
        per_run = [one(k) for k in range(runs)]
    return [[row[j] for row in per_run] for j in range(len(policies))]


def inefficiency_ratio(cfg: NetworkConfig, policy: PolicySpec, state: SystemState,
                       runs: int, horizon: int, seed: int, planner: PlannerConfig,
                       mode: str = "belief", threads: int = 1,
                       planner_cache: Optional[dict] = None,
                       latency_limit: float = LATENCY_LIMIT) -> GammaEstimate:
    """Average inefficiency of ``policy`` against receding-horizon optimal routing."""
    optimal = PolicySpec(PolicyKind.SOCIAL_OPTIMAL, planner)
    if policy.kind in (PolicyKind.SOCIAL_OPTIMAL, PolicyKind.SID) and policy.planner is None:
        policy = PolicySpec(policy.kind, planner)
    pol, opt = paired_costs(cfg, [policy, optimal], state, runs, horizon, seed, mode,
                            threads, planner_cache, latency_limit)
    if min(opt) <= 0:
        raise ValueError("optimal policy produced a zero cost run")
    r, se = ratio_of_means(pol, opt)
    return GammaEstimate(r, se, runs, tuple(pol), tuple(opt))


# -- threshold sweep -------------------------------------------------------------

def threshold_sweep(cfg: NetworkConfig, template: SystemState, x_grid: Sequence[float],
                    planner: PlannerConfig, probes: Optional[list] = None
                    ) -> list[tuple[float, float, float]]:
    """Rows ``(x, myopic threshold, optimal exploration threshold)`` for path 1."""
    if template.n_risky != 1:
        raise ValueError("threshold_sweep needs a single-risky-path template")
    rows = []
    for x in x_grid:
        s = template.with_risky(1, belief=float(x))
        rows.append((float(x), myopic_threshold(s),
                     exploration_threshold(s, 1, cfg, planner, probes)))
    return rows
