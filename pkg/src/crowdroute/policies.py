"""Routing rules: myopic users, uninformed users, and the SID mechanism."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Optional

import numpy as np

from .model import NetworkConfig, SystemState, stationary_belief

if TYPE_CHECKING:
    from .planner import PlannerConfig, PlanResult


class PolicyKind(enum.Enum):
    MYOPIC = "myopic"
    SOCIAL_OPTIMAL = "optimal"
    HIDING = "hiding"
    SID = "sid"


@dataclass(frozen=True)
class PolicySpec:
    kind: PolicyKind
    planner: Optional["PlannerConfig"] = None

    def __post_init__(self) -> None:
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.kind in (PolicyKind.SOCIAL_OPTIMAL, PolicyKind.SID) and self.planner is None:
            raise ValueError(f"{self.kind.value} policy needs a planner configuration")

    @property
    def name(self) -> str:
        return self.kind.value


@dataclass(frozen=True)
class RoutingOutcome:
    """What the SID platform did for one user.

    ``recommendation`` is the planner's path; ``disclosed`` says whether the
    latency vector was revealed, in which case the user routes myopically.
    """

    action: int
    disclosed: bool
    recommendation: int

    def __post_init__(self) -> None:
        if not self.disclosed and self.action != self.recommendation:
            raise ValueError("an undisclosed user must follow the recommendation")


def best_risky_path(state: SystemState) -> int:
    """Risky path with the lowest expected latency (lowest index on ties)."""
    ells = state.ell_risky
    return min(range(len(ells)), key=lambda j: (ells[j], j)) + 1


def myopic_route(state: SystemState) -> int:
    best = best_risky_path(state)
    # path 0 wins ties
    return 0 if state.ell_risky[best - 1] >= state.ell0 else best


def hiding_randomizes(cfg: NetworkConfig) -> bool:
    """True when an uninformed user prefers the risky paths at the stationary belief."""
    return stationary_belief(cfg) < cfg.indifference_belief


def hiding_route(cfg: NetworkConfig, rng: np.random.Generator) -> int:
    """Route of a user who only knows the stationary belief.

    Draws one integer from ``rng`` only in the randomized regime.
    """
    if not hiding_randomizes(cfg):
        return 0
    return int(rng.integers(1, cfg.n_risky + 1))


def sid_route(state: SystemState, cfg: NetworkConfig,
              planner: Callable[[SystemState], "PlanResult"]) -> RoutingOutcome:
    """Selective information disclosure for the current user.

    The latency vector is revealed only when the planner says stay on path 0
    while an uninformed user would pick a risky path with positive
    probability; an informed user then routes myopically.  Otherwise the user
    follows the recommendation.
    """
    rec = planner(state).action
    if rec == 0 and hiding_randomizes(cfg):
        return RoutingOutcome(myopic_route(state), True, rec)
    return RoutingOutcome(rec, False, rec)
