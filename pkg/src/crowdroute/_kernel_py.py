"""Pure-Python expectimax kernel.

This is the fallback for ``crowdroute._kernel`` and must stay in lock-step
with it: same operations, same order, so both produce bit-identical doubles.
Parameters are passed as a flat tuple::

    (alpha, alpha_low, alpha_high, q_hh, q_lh, p_h, p_l, delta_ell, rho)
"""
from __future__ import annotations

import math

INF = math.inf


def _node(depth, ell0, ell, x, prm, perpetuity, counter):
    counter[0] += 1
    alpha, a_lo, a_hi, q_hh, q_lh, p_h, p_l, d_ell, rho = prm
    n = len(ell)
    if depth == 0:
        if not perpetuity:
            return 0.0
        m = ell0
        for v in ell:
            if v < m:
                m = v
        return m / (1.0 - rho)

    # Successor of every risky path when it is not travelled.
    en = [0.0] * n
    xn = [0.0] * n
    for j in range(n):
        xj = x[j]
        en[j] = (xj * a_hi + (1.0 - xj) * a_lo) * ell[j]
        xn[j] = xj * q_hh + (1.0 - xj) * q_lh
    s0 = alpha * ell0

    # Myopic action first to tighten the pruning bound early.
    first = 0
    lo = ell0
    for j in range(n):
        if ell[j] < lo:
            lo = ell[j]
            first = j + 1

    best = INF
    for k in range(-1, n + 1):
        if k == -1:
            a = first
        elif k == first:
            continue
        else:
            a = k
        imm = ell0 if a == 0 else ell[a - 1]
        if imm >= best:
            continue
        q = _q_action(a, depth, ell0, ell, x, en, xn, s0, prm, perpetuity, counter)
        if q < best:
            best = q
    return best


def _q_action(a, depth, ell0, ell, x, en, xn, s0, prm, perpetuity, counter):
    alpha, a_lo, a_hi, q_hh, q_lh, p_h, p_l, d_ell, rho = prm
    if a == 0:
        v = _node(depth - 1, s0 + d_ell, en, xn, prm, perpetuity, counter)
        return ell0 + rho * v

    i = a - 1
    xi = x[i]
    imm = ell[i]
    p1 = xi * p_h + (1.0 - xi) * p_l
    ce = list(en)
    cx = list(xn)

    v1 = 0.0
    if p1 > 0.0:
        num = xi * p_h
        den = num + (1.0 - xi) * p_l
        xp = num / den if den > 0.0 else xi
        ce[i] = (xp * a_hi + (1.0 - xp) * a_lo) * imm + d_ell
        cx[i] = xp * q_hh + (1.0 - xp) * q_lh
        v1 = _node(depth - 1, s0, ce, cx, prm, perpetuity, counter)
    v0 = 0.0
    if p1 < 1.0:
        num = xi * (1.0 - p_h)
        den = num + (1.0 - xi) * (1.0 - p_l)
        xp = num / den if den > 0.0 else xi
        ce[i] = (xp * a_hi + (1.0 - xp) * a_lo) * imm + d_ell
        cx[i] = xp * q_hh + (1.0 - xp) * q_lh
        v0 = _node(depth - 1, s0, ce, cx, prm, perpetuity, counter)
    return imm + rho * (p1 * v1 + (1.0 - p1) * v0)


def root_q_values(horizon, ell0, ell, x, prm, perpetuity):
    """Q-value of every action at the root, plus the number of nodes visited.

    ``horizon`` counts decisions; the root itself is one of them.
    """
    ell = [float(v) for v in ell]
    x = [float(v) for v in x]
    n = len(ell)
    counter = [1]
    a_lo, a_hi, q_hh, q_lh = prm[1], prm[2], prm[3], prm[4]
    en = [0.0] * n
    xn = [0.0] * n
    for j in range(n):
        xj = x[j]
        en[j] = (xj * a_hi + (1.0 - xj) * a_lo) * ell[j]
        xn[j] = xj * q_hh + (1.0 - xj) * q_lh
    s0 = prm[0] * ell0
    qs = [
        _q_action(a, horizon, ell0, ell, x, en, xn, s0, prm, perpetuity, counter)
        for a in range(n + 1)
    ]
    return qs, counter[0]


def state_value(depth, ell0, ell, x, prm, perpetuity):
    """Optimal value with ``depth`` decisions left (``depth=0`` is the terminal)."""
    counter = [0]
    v = _node(depth, float(ell0), [float(v) for v in ell], [float(v) for v in x],
              prm, perpetuity, counter)
    return v, counter[0]
