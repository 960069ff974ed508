import os
import random
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import hmm_joint, predicted_belief
from crowdroute import _backend
from crowdroute.experiments import fig2_config, fig2_state, run_trajectory
from crowdroute.model import (
    NetworkConfig,
    Observation,
    Outcome,
    SystemState,
    hazard_probability,
    posterior_belief,
    transition,
)
from crowdroute.planner import (
    PlannerConfig,
    PlannerError,
    ThresholdBracketError,
    ThresholdNumericalError,
    belief_crossing,
    exploration_threshold,
    latency_upper_bound,
    lemma2_holds,
    make_planner,
    myopic_threshold,
    optimal_plan,
    q_value,
    root_q_values,
    state_value,
    tree_size,
)
from crowdroute.policies import PolicySpec


def all_policy_costs(cfg: NetworkConfig, s: SystemState, horizon: int,
                     perpetuity: bool = False) -> list[float]:
    """Expected cost of every adaptive policy tree on a one-risky-path network.

    Report probabilities and posteriors come from enumerating hidden state
    sequences, not from the filter under test.
    """
    x0 = s.beliefs[0]
    a_lo, a_hi = cfg.alpha_low, cfg.alpha_high

    def coeff(x):
        return x * a_hi + (1 - x) * a_lo

    def node(ys, ell0, ell1, depth):
        if depth == 0:
            return [min(ell0, ell1) / (1 - cfg.rho) if perpetuity else 0.0]
        x = predicted_belief(x0, ys, cfg) if ys else x0
        out = [ell0 + cfg.rho * v
               for v in node(ys + [None], cfg.alpha * ell0 + cfg.delta_ell,
                             coeff(x) * ell1, depth - 1)]
        base = hmm_joint(x0, ys, cfg)[0] if ys else 1.0
        branches = []
        for y in (1, 0):
            tot, high = hmm_joint(x0, ys + [y], cfg)
            branches.append((tot / base, node(ys + [y], cfg.alpha * ell0,
                                               coeff(high / tot) * ell1 + cfg.delta_ell,
                                               depth - 1)))
        (p1, sub1), (_, sub0) = branches
        out += [ell1 + cfg.rho * (p1 * a + (1 - p1) * b) for a in sub1 for b in sub0]
        return out

    return node([], s.ell0, s.ell_risky[0], horizon)


def reference_value(s: SystemState, cfg: NetworkConfig, depth: int) -> float:
    """Unpruned expectimax written against the model module."""
    if depth == 0:
        return 0.0
    n = s.n_risky
    best = s.ell0 + cfg.rho * reference_value(transition(s, 0, Observation.empty(n), cfg),
                                              cfg, depth - 1)
    for i in range(1, n + 1):
        p1 = hazard_probability(s.beliefs[i - 1], cfg)
        cont = 0.0
        for y, p in ((Outcome.HAZARD, p1), (Outcome.NO_HAZARD, 1 - p1)):
            if p > 0:
                cont += p * reference_value(transition(s, i, Observation.on(i, y, n), cfg),
                                            cfg, depth - 1)
        best = min(best, s.ell_risky[i - 1] + cfg.rho * cont)
    return best


# -- oracles -----------------------------------------------------------------

@pytest.mark.parametrize("mode", ["zero", "perpetuity"])
def test_matches_policy_enumeration(mode):
    cfg = fig2_config(rho=0.9)
    s = SystemState(10.0, (9.0,), (0.1,))
    costs = all_policy_costs(cfg, s, 3, perpetuity=mode == "perpetuity")
    assert len(costs) == 42
    plan = optimal_plan(s, cfg, PlannerConfig(horizon=3, terminal_value_mode=mode))
    assert plan.cost == pytest.approx(min(costs), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(x=st.floats(0.0, 1.0), ell0=st.floats(0.5, 20.0), ell1=st.floats(0.5, 20.0),
       rho=st.floats(0.0, 0.99), q=st.floats(0.05, 0.95))
def test_enumeration_random_states(x, ell0, ell1, rho, q):
    cfg = fig2_config(rho=rho).with_(q_hh=q)
    s = SystemState(ell0, (ell1,), (x,))
    plan = optimal_plan(s, cfg, PlannerConfig(horizon=3))
    assert plan.cost == pytest.approx(min(all_policy_costs(cfg, s, 3)), rel=1e-10)


def test_pruning_matches_unpruned_reference(cfg3):
    rng = random.Random(4)
    for _ in range(8):
        s = SystemState(rng.uniform(1, 10), tuple(rng.uniform(1, 10) for _ in range(3)),
                        tuple(rng.random() for _ in range(3)))
        v = optimal_plan(s, cfg3, PlannerConfig(horizon=3)).cost
        assert v == pytest.approx(reference_value(s, cfg3, 3), rel=1e-12)


# -- basic semantics -----------------------------------------------------------

def test_one_step_is_greedy(cfg3):
    s = SystemState(5.0, (7.0, 4.0, 4.0), (0.2, 0.9, 0.1))
    plan = optimal_plan(s, cfg3, PlannerConfig(horizon=1))
    assert plan.cost == 4.0
    assert plan.action == 2
    assert q_value(s, 0, cfg3, PlannerConfig(horizon=1)) == 5.0


def test_tie_goes_to_safe_path(cfg3):
    s = SystemState(4.0, (4.0, 4.0, 4.0), (0.5, 0.5, 0.5))
    assert optimal_plan(s, cfg3, PlannerConfig(horizon=1)).action == 0


def test_terminal_value():
    cfg = fig2_config()
    s = fig2_state(0.3)
    assert state_value(s, cfg, 0) == 0.0
    assert state_value(s, cfg, 0, "perpetuity") == pytest.approx(10.0 / 0.01)


def test_q_values_bound_plan(cfg3):
    s = SystemState(5.0, (6.0, 5.5, 3.0), (0.3, 0.6, 0.8))
    pcfg = PlannerConfig(horizon=4)
    plan = optimal_plan(s, cfg3, pcfg)
    for a in range(4):
        assert q_value(s, a, cfg3, pcfg) >= plan.cost
    assert q_value(s, plan.action, cfg3, pcfg) == plan.cost
    with pytest.raises(ValueError):
        q_value(s, 4, cfg3, pcfg)


def test_state_value_equals_root_min(cfg3):
    s = SystemState(5.0, (6.0, 5.5, 3.0), (0.3, 0.6, 0.8))
    qs, _ = root_q_values(s, cfg3, PlannerConfig(horizon=4))
    assert state_value(s, cfg3, 4) == min(qs)


def test_value_grows_with_horizon():
    cfg = fig2_config(rho=0.9)
    s = fig2_state(0.3)
    vals = [state_value(s, cfg, t) for t in range(1, 10)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    # the tail beyond T steps is at most rho^T times a bounded per-step latency
    gap = vals[-1] - vals[-2]
    assert gap <= cfg.rho**8 * latency_upper_bound(s, cfg, 9)


@settings(max_examples=30, deadline=None)
@given(x=st.lists(st.floats(0.0, 1.0), min_size=2, max_size=2),
       ell=st.lists(st.floats(0.0, 30.0), min_size=2, max_size=2),
       bump=st.floats(0.0, 10.0), path=st.integers(0, 2))
def test_value_monotone_in_latency(x, ell, bump, path):
    cfg = NetworkConfig(n_risky=2, alpha=0.7, alpha_low=0.3, alpha_high=1.5, q_ll=0.9,
                        q_hh=0.8, p_h=0.75, p_l=0.25, delta_ell=1.5, rho=0.8)
    s = SystemState(5.0, tuple(ell), tuple(x))
    if path == 0:
        t = SystemState(5.0 + bump, tuple(ell), tuple(x))
    else:
        t = s.with_risky(path, ell=ell[path - 1] + bump)
    assert state_value(t, cfg, 4) >= state_value(s, cfg, 4) - 1e-9


# -- backends ------------------------------------------------------------------

needs_compiled = pytest.mark.skipif("compiled" not in _backend.KERNELS,
                                    reason="compiled kernel not built")


@needs_compiled
@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 3), horizon=st.integers(1, 4), data=st.data(),
       mode=st.sampled_from(["zero", "perpetuity"]))
def test_backends_bit_identical(n, horizon, data, mode):
    ells = data.draw(st.lists(st.floats(0.0, 200.0), min_size=n, max_size=n))
    xs = data.draw(st.lists(st.floats(0.0, 1.0), min_size=n, max_size=n))
    ell0 = data.draw(st.floats(0.0, 200.0))
    cfg = NetworkConfig(n_risky=n, alpha=0.9, alpha_low=0.1, alpha_high=1.7, q_ll=0.95,
                        q_hh=0.9, p_h=0.85, p_l=0.2, delta_ell=1.0, rho=0.95)
    s = SystemState(ell0, tuple(ells), tuple(xs))
    pcfg = PlannerConfig(horizon=horizon, terminal_value_mode=mode)
    assert (root_q_values(s, cfg, pcfg, "python")
            == root_q_values(s, cfg, pcfg, "compiled"))
    assert (state_value(s, cfg, horizon, mode, "python")
            == state_value(s, cfg, horizon, mode, "compiled"))


@pytest.mark.parametrize("choice, expected", [
    ("python", "python"),
    ("auto", "compiled" if "compiled" in _backend.KERNELS else "python"),
])
def test_backend_selected_at_import(choice, expected):
    env = {**os.environ, "CROWDROUTE_BACKEND": choice}
    out = subprocess.run([sys.executable, "-c", "import crowdroute; print(crowdroute.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected


def test_unknown_backend():
    with pytest.raises(ValueError):
        optimal_plan(fig2_state(), fig2_config(), PlannerConfig(horizon=1), backend="gpu")


# -- limits --------------------------------------------------------------------

def test_tree_size():
    assert tree_size(1, 2) == 1 + 3 + 9
    assert tree_size(5, 6) == sum(11**k for k in range(7))


def test_node_cap_rejects_large_trees(cfg3):
    s = SystemState(5.0, (5.0,) * 3, (0.5,) * 3)
    with pytest.raises(PlannerError, match="smaller horizon"):
        optimal_plan(s, cfg3, PlannerConfig(horizon=8, node_cap=10_000))
    plan = optimal_plan(s, cfg3, PlannerConfig(horizon=3, node_cap=tree_size(3, 3)))
    assert plan.nodes <= tree_size(3, 3)


def test_planner_config_validation():
    with pytest.raises(ValueError):
        PlannerConfig(horizon=0)
    with pytest.raises(ValueError):
        PlannerConfig(terminal_value_mode="bootstrap")
    with pytest.raises(ValueError):
        PlannerConfig(bisection_tol=0.0)


def test_memoised_planner(cfg3):
    cache = {}
    plan = make_planner(cfg3, PlannerConfig(horizon=3), cache)
    s = SystemState(5.0, (6.0, 5.5, 3.0), (0.3, 0.6, 0.8))
    first = plan(s)
    assert plan(s) is first
    assert len(cache) == 1


# -- thresholds ----------------------------------------------------------------

def test_myopic_threshold():
    assert myopic_threshold(fig2_state()) == 10.0
    assert myopic_threshold(SystemState(0.0, (1.0,), (0.5,))) == 0.0


def test_over_and_under_exploration():
    cfg = fig2_config()
    pcfg = PlannerConfig(horizon=8)
    assert exploration_threshold(fig2_state(0.1), 1, cfg, pcfg) < 10.0
    assert exploration_threshold(fig2_state(0.9), 1, cfg, pcfg) > 10.0


def test_no_future_means_myopic():
    cfg = fig2_config(rho=0.0)
    pcfg = PlannerConfig(horizon=4)
    for x in (0.1, 0.5, 0.9):
        z = exploration_threshold(fig2_state(x), 1, cfg, pcfg)
        assert z == pytest.approx(10.0, abs=pcfg.bisection_tol)


def test_threshold_errors_are_distinct():
    assert not issubclass(ThresholdBracketError, ArithmeticError)
    assert not issubclass(ThresholdNumericalError, ValueError)
    with pytest.raises(ValueError):
        exploration_threshold(fig2_state(), 2, fig2_config(), PlannerConfig(horizon=2))


def test_threshold_cap_when_exploring_always_wins():
    # path 0 is hopelessly congested; exploring wins at every latency in the bracket
    cfg = fig2_config(rho=0.5)
    s = SystemState(1e6, (0.0,), (0.0,))
    assert exploration_threshold(s, 1, cfg, PlannerConfig(horizon=2, bracket_cap=100.0)) \
        == 100.0


def test_threshold_probes_recorded():
    probes = []
    exploration_threshold(fig2_state(0.3), 1, fig2_config(), PlannerConfig(horizon=3),
                          probes)
    assert len(probes) > 10
    s, qs = probes[0]
    assert len(qs) == 2 and s.ell_risky[0] == 0.0


def test_crossing_for_coinciding_bracket():
    # indifference belief and stationary belief both equal 1/2
    cfg = NetworkConfig(n_risky=1, alpha=0.7, alpha_low=0.2, alpha_high=1.2, q_ll=0.5,
                        q_hh=0.5, p_h=0.8, p_l=0.3, delta_ell=2.0, rho=0.9)
    c = belief_crossing(cfg, fig2_state(), 0.05, PlannerConfig(horizon=6))
    assert c.found
    assert abs(c.x - 0.5) <= 0.05


def test_crossing_needs_single_path(cfg3):
    with pytest.raises(ValueError):
        belief_crossing(cfg3, SystemState(1.0, (1.0,) * 3, (0.5,) * 3), 0.1,
                        PlannerConfig(horizon=2))


# -- structural checks -----------------------------------------------------------

def test_lemma2_on_random_states(cfg3):
    rng = np.random.default_rng(8)
    pcfg = PlannerConfig(horizon=4)
    for _ in range(40):
        s = SystemState(float(rng.uniform(0, 20)), tuple(rng.uniform(0, 20, 3)),
                        tuple(rng.random(3)))
        assert lemma2_holds(s, optimal_plan(s, cfg3, pcfg), cfg3)


def test_latency_upper_bound_holds_on_trajectories(cfg3):
    s = SystemState(5.0, (6.0, 5.5, 3.0), (0.3, 0.6, 0.8))
    for policy in ("myopic", "hiding"):
        rec = run_trajectory(cfg3, PolicySpec(policy), s, 30, 5)
        for step in rec.steps:
            bound = latency_upper_bound(s, cfg3, step.t)
            assert max(step.state.ell0, *step.state.ell_risky) <= bound * (1 + 1e-12)


def test_posterior_agrees_with_kernel_branch():
    # the kernel's inline Bayes update and the model's agree on the y=1 branch
    cfg = fig2_config()
    s = fig2_state(0.35)
    x1 = posterior_belief(0.35, Outcome.HAZARD, cfg)
    nxt = transition(s, 1, Observation.on(1, Outcome.HAZARD, 1), cfg)
    assert nxt.ell_risky[0] == pytest.approx((x1 * 1.2 + (1 - x1) * 0.2) * 10.0 + 2.0)
