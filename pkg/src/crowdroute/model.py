"""Latency and hazard-belief dynamics of the parallel congestion network.

Path 0 is the safe path with a fixed leftover coefficient ``alpha``.  Paths
``1..N`` are risky: their coefficient switches between ``alpha_low`` and
``alpha_high`` according to a hidden two-state Markov chain, which the
platform tracks through a per-path hazard belief updated from user reports.

All functions here are pure; randomness comes in through an explicitly
passed ``numpy.random.Generator``.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

#: Any latency above this aborts a run.
LATENCY_LIMIT = 1e15


class DegenerateUpdateWarning(RuntimeWarning):
    """A Bayes update hit a zero-probability observation; the prior was kept."""


class LatencyDivergenceError(ArithmeticError):
    """Raised when a simulated latency exceeds ``LATENCY_LIMIT``."""


def _check_probability(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class NetworkConfig:
    """Static game parameters.

    ``q_ll`` and ``q_hh`` are the self-transition probabilities of the hidden
    coefficient chain; ``p_h`` and ``p_l`` are the probabilities that a user
    on a risky path reports a hazard when the path is in the high and low
    state respectively.
    """

    n_risky: int
    alpha: float
    alpha_low: float
    alpha_high: float
    q_ll: float
    q_hh: float
    p_h: float
    p_l: float
    delta_ell: float
    rho: float

    def __post_init__(self) -> None:
        if int(self.n_risky) != self.n_risky or self.n_risky < 1:
            raise ValueError(f"n_risky must be an integer >= 1, got {self.n_risky!r}")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not (0.0 <= self.alpha_low < 1.0):
            raise ValueError(f"alpha_low must lie in [0, 1), got {self.alpha_low!r}")
        if not (self.alpha_high >= 1.0 and math.isfinite(self.alpha_high)):
            raise ValueError(f"alpha_high must be finite and >= 1, got {self.alpha_high!r}")
        if not (self.alpha_low < self.alpha < self.alpha_high):
            raise ValueError(
                "alpha ordering violated: need alpha_low < alpha < alpha_high, got "
                f"alpha_low={self.alpha_low!r}, alpha={self.alpha!r}, "
                f"alpha_high={self.alpha_high!r}"
            )
        for name in ("q_ll", "q_hh", "p_h", "p_l"):
            _check_probability(name, getattr(self, name))
        if not self.p_l < self.p_h:
            raise ValueError(f"p_l must be < p_h, got p_l={self.p_l!r}, p_h={self.p_h!r}")
        if not (self.delta_ell > 0.0 and math.isfinite(self.delta_ell)):
            raise ValueError(f"delta_ell must be finite and > 0, got {self.delta_ell!r}")
        if not (0.0 <= self.rho < 1.0):
            raise ValueError(f"rho must lie in [0, 1), got {self.rho!r}")

    @property
    def q_lh(self) -> float:
        return 1.0 - self.q_ll

    @property
    def q_hl(self) -> float:
        return 1.0 - self.q_hh

    @property
    def indifference_belief(self) -> float:
        """Belief at which a risky path's expected coefficient equals ``alpha``."""
        return (self.alpha - self.alpha_low) / (self.alpha_high - self.alpha_low)

    def with_(self, **changes) -> "NetworkConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class SystemState:
    """Platform-side state at the start of a slot.

    ``ell_risky[i - 1]`` and ``beliefs[i - 1]`` belong to risky path ``i``.
    """

    ell0: float
    ell_risky: tuple[float, ...]
    beliefs: tuple[float, ...]
    t: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "ell_risky", tuple(float(v) for v in self.ell_risky))
        object.__setattr__(self, "beliefs", tuple(float(v) for v in self.beliefs))
        if len(self.ell_risky) != len(self.beliefs) or not self.ell_risky:
            raise ValueError("ell_risky and beliefs must be non-empty and of equal length")
        for v in (self.ell0, *self.ell_risky):
            if not (math.isfinite(v) and v >= 0.0):
                raise ValueError(f"latencies must be finite and >= 0, got {v!r}")
        for x in self.beliefs:
            _check_probability("belief", x)
        if self.t < 0:
            raise ValueError("t must be non-negative")

    @property
    def n_risky(self) -> int:
        return len(self.ell_risky)

    def latency(self, path: int) -> float:
        """Expected latency of ``path`` (0 is the safe path)."""
        return self.ell0 if path == 0 else self.ell_risky[path - 1]

    def with_risky(self, path: int, *, ell: Optional[float] = None,
                   belief: Optional[float] = None) -> "SystemState":
        """Copy with one risky path's latency and/or belief replaced."""
        ells = list(self.ell_risky)
        xs = list(self.beliefs)
        if ell is not None:
            ells[path - 1] = ell
        if belief is not None:
            xs[path - 1] = belief
        return replace(self, ell_risky=tuple(ells), beliefs=tuple(xs))

    def check(self, cfg: NetworkConfig) -> None:
        if self.n_risky != cfg.n_risky:
            raise ValueError(
                f"state has {self.n_risky} risky paths but config has {cfg.n_risky}"
            )


class Outcome(enum.Enum):
    HAZARD = 1
    NO_HAZARD = 0


@dataclass(frozen=True)
class Observation:
    """Per-risky-path report for one slot; ``None`` means the path was not travelled."""

    outcomes: tuple[Optional[Outcome], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        if sum(o is not None for o in self.outcomes) > 1:
            raise ValueError("at most one risky path can be observed per slot")

    @classmethod
    def empty(cls, n_risky: int) -> "Observation":
        return cls((None,) * n_risky)

    @classmethod
    def on(cls, path: int, outcome: Outcome, n_risky: int) -> "Observation":
        outs: list[Optional[Outcome]] = [None] * n_risky
        outs[path - 1] = outcome
        return cls(tuple(outs))

    def observed(self) -> Optional[tuple[int, Outcome]]:
        """``(path, outcome)`` of the single report, or ``None``."""
        for i, o in enumerate(self.outcomes, start=1):
            if o is not None:
                return i, o
        return None


@dataclass(frozen=True)
class HiddenTruth:
    """Ground-truth coefficient state per risky path (``True`` = high)."""

    high: tuple[bool, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "high", tuple(bool(h) for h in self.high))


# -- belief filter ---------------------------------------------------------

def posterior_belief(x: float, y: Outcome, cfg: NetworkConfig) -> float:
    """Bayes update of the hazard belief after one report on the path."""
    _check_probability("x", x)
    if y is Outcome.HAZARD:
        num = x * cfg.p_h
        den = num + (1.0 - x) * cfg.p_l
    else:
        num = x * (1.0 - cfg.p_h)
        den = num + (1.0 - x) * (1.0 - cfg.p_l)
    if den <= 0.0:
        warnings.warn(
            f"zero-probability report {y.name} at belief {x!r}; keeping prior",
            DegenerateUpdateWarning,
            stacklevel=2,
        )
        return x
    return num / den


def propagate_belief(x_post: float, cfg: NetworkConfig) -> float:
    """One step of the hidden chain applied to a posterior belief."""
    return x_post * cfg.q_hh + (1.0 - x_post) * cfg.q_lh


def expected_coefficient(x_post: float, cfg: NetworkConfig) -> float:
    return x_post * cfg.alpha_high + (1.0 - x_post) * cfg.alpha_low


def hazard_probability(x: float, cfg: NetworkConfig) -> float:
    """Probability that a user on the path reports a hazard."""
    return x * cfg.p_h + (1.0 - x) * cfg.p_l


def stationary_belief(cfg: NetworkConfig) -> float:
    denom = 2.0 - cfg.q_ll - cfg.q_hh
    if denom <= 0.0:
        raise ValueError("q_ll = q_hh = 1: the chain has no unique stationary belief")
    return (1.0 - cfg.q_ll) / denom


# -- latencies -------------------------------------------------------------

def step_safe_latency(ell0: float, chosen: bool, cfg: NetworkConfig) -> float:
    nxt = cfg.alpha * ell0
    return nxt + cfg.delta_ell if chosen else nxt


def step_risky_latency(ell: float, x_post: float, chosen: bool, cfg: NetworkConfig) -> float:
    nxt = expected_coefficient(x_post, cfg) * ell
    return nxt + cfg.delta_ell if chosen else nxt


def _guard(value: float, limit: float) -> float:
    if not value <= limit:
        raise LatencyDivergenceError(f"latency {value!r} exceeds {limit:g}")
    return value


def transition(state: SystemState, action: int, obs: Observation,
               cfg: NetworkConfig, latency_limit: float = LATENCY_LIMIT) -> SystemState:
    """Advance the platform state by one slot.

    Raises :class:`LatencyDivergenceError` if any new latency exceeds
    ``latency_limit``.
    """
    n = state.n_risky
    if not (0 <= action <= n):
        raise ValueError(f"action {action!r} out of range 0..{n}")
    if len(obs.outcomes) != n:
        raise ValueError("observation length does not match the number of risky paths")
    report = obs.observed()
    if report is not None and report[0] != action:
        raise ValueError(f"observation on path {report[0]} but action was {action}")

    ell0 = _guard(step_safe_latency(state.ell0, action == 0, cfg), latency_limit)
    ells = []
    xs = []
    for i, (ell, x) in enumerate(zip(state.ell_risky, state.beliefs), start=1):
        y = obs.outcomes[i - 1]
        x_post = x if y is None else posterior_belief(x, y, cfg)
        ells.append(_guard(step_risky_latency(ell, x_post, action == i, cfg), latency_limit))
        xs.append(propagate_belief(x_post, cfg))
    return SystemState(ell0, tuple(ells), tuple(xs), state.t + 1)


# -- sampling --------------------------------------------------------------

def sample_observation(state: SystemState, action: int, cfg: NetworkConfig,
                       rng: np.random.Generator, mode: str = "belief",
                       truth: Optional[HiddenTruth] = None) -> Observation:
    """Draw the report generated by routing the current user on ``action``.

    In ``belief`` mode the hazard probability comes from the platform belief;
    in ``truth`` mode it is ``p_h`` or ``p_l`` according to the true state of
    the travelled path.  Exactly one uniform is consumed for a risky action and
    none for the safe path.
    """
    if mode not in ("belief", "truth"):
        raise ValueError(f"unknown mode {mode!r}")
    if (truth is not None) != (mode == "truth"):
        raise ValueError("truth must be given exactly when mode='truth'")
    n = state.n_risky
    if action == 0:
        return Observation.empty(n)
    if mode == "belief":
        p = hazard_probability(state.beliefs[action - 1], cfg)
    else:
        p = cfg.p_h if truth.high[action - 1] else cfg.p_l
    outcome = Outcome.HAZARD if rng.random() < p else Outcome.NO_HAZARD
    return Observation.on(action, outcome, n)


def sample_truth(beliefs: Sequence[float], rng: np.random.Generator) -> HiddenTruth:
    """Initial hidden states drawn independently from the given beliefs."""
    return HiddenTruth(tuple(bool(rng.random() < x) for x in beliefs))


def step_truth(truth: HiddenTruth, cfg: NetworkConfig,
               rng: np.random.Generator) -> HiddenTruth:
    """Advance every path's hidden coefficient state by one chain step."""
    nxt = []
    for high in truth.high:
        stay = cfg.q_hh if high else cfg.q_ll
        nxt.append(high if rng.random() < stay else not high)
    return HiddenTruth(tuple(nxt))
