"""Routing on a congestion network whose risky paths are learned from user reports."""
from ._backend import BACKEND
from .model import (
    HiddenTruth,
    NetworkConfig,
    Observation,
    Outcome,
    SystemState,
    stationary_belief,
    transition,
)
from .planner import PlannerConfig, PlanResult, exploration_threshold, optimal_plan
from .policies import PolicyKind, PolicySpec

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "HiddenTruth",
    "NetworkConfig",
    "Observation",
    "Outcome",
    "PlanResult",
    "PlannerConfig",
    "PolicyKind",
    "PolicySpec",
    "SystemState",
    "exploration_threshold",
    "optimal_plan",
    "stationary_belief",
    "transition",
]
