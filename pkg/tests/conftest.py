import itertools

import pytest

from crowdroute.model import NetworkConfig


def hmm_joint(x0: float, ys, cfg: NetworkConfig) -> tuple[float, float]:
    """Brute-force ``(P(y_0..y_k), P(y_0..y_k, s_k = high))`` over all hidden paths.

    ``ys[k]`` is ``None`` (no report), 1 (hazard) or 0.  Slot ``k``'s report
    depends on the hidden state at slot ``k``; the chain moves between slots.
    """
    total = high = 0.0
    for seq in itertools.product((0, 1), repeat=len(ys)):
        w = x0 if seq[0] else 1.0 - x0
        for a, b in zip(seq, seq[1:]):
            stay = cfg.q_hh if a else cfg.q_ll
            w *= stay if a == b else 1.0 - stay
        for s, y in zip(seq, ys):
            if y is None:
                continue
            p = cfg.p_h if s else cfg.p_l
            w *= p if y == 1 else 1.0 - p
        total += w
        if seq[-1]:
            high += w
    return total, high


def predicted_belief(x0: float, ys, cfg: NetworkConfig) -> float:
    """Brute-force hazard belief for the slot after the reports ``ys``."""
    total, high = hmm_joint(x0, ys, cfg)
    post = high / total
    return post * cfg.q_hh + (1.0 - post) * (1.0 - cfg.q_ll)


@pytest.fixture
def fig2_cfg():
    return NetworkConfig(n_risky=1, alpha=0.6, alpha_low=0.2, alpha_high=1.2, q_ll=0.5,
                         q_hh=0.5, p_h=0.8, p_l=0.3, delta_ell=2.0, rho=0.99)


@pytest.fixture
def cfg3():
    """Three risky paths with a sticky chain."""
    return NetworkConfig(n_risky=3, alpha=0.7, alpha_low=0.3, alpha_high=1.5, q_ll=0.9,
                         q_hh=0.8, p_h=0.75, p_l=0.25, delta_ell=1.5, rho=0.8)
