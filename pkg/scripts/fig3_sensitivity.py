"""Sensitivity of the Fig. 3 inefficiency ratios to the unspecified settings.

Varies the discount factor, planner horizon, terminal value, observation
mode and alpha_high, and prints gamma for myopic and SID routing at each N.

    python scripts/fig3_sensitivity.py [--runs 50] [--seed 2024]
"""
import argparse
import itertools

from crowdroute.experiments import (
    FIG3_LATENCY_LIMIT,
    fig3_config,
    fig3_state,
    paired_costs,
    ratio_of_means,
)
from crowdroute.planner import PlannerConfig
from crowdroute.policies import PolicySpec


def gammas(rho, horizon, terminal, mode, alpha_high, runs, seed, ns=(2, 3, 4, 5)):
    pcfg = PlannerConfig(horizon=horizon, terminal_value_mode=terminal)
    pols = [PolicySpec("myopic"), PolicySpec("sid", pcfg), PolicySpec("optimal", pcfg)]
    out = {}
    for n in ns:
        cfg = fig3_config(n, alpha_high=alpha_high, rho=rho)
        my, sid, opt = paired_costs(cfg, pols, fig3_state(n), runs, 300, seed, mode,
                                    latency_limit=FIG3_LATENCY_LIMIT)
        out[n] = (ratio_of_means(my, opt), ratio_of_means(sid, opt))
    return out


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=50)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()
    grid = itertools.chain(
        ((rho, 6, "zero", "belief", 2.0) for rho in (0.9, 0.95, 0.99, 0.995)),
        ((0.99, h, "zero", "belief", 2.0) for h in (2, 4)),
        [(0.99, 6, "perpetuity", "belief", 2.0), (0.99, 6, "zero", "truth", 2.0)],
        ((0.99, 6, "zero", "belief", ah) for ah in (1.5, 3.0, 5.0)),
    )
    print("rho    T  terminal    mode    a_H  | gamma_myopic (N=2..5)          | gamma_sid")
    for rho, h, term, mode, ah in grid:
        g = gammas(rho, h, term, mode, ah, args.runs, args.seed)
        gm = " ".join(f"{g[n][0][0]:6.2f}" for n in sorted(g))
        gs = " ".join(f"{g[n][1][0]:5.2f}" for n in sorted(g))
        print(f"{rho:<6} {h}  {term:<10}  {mode:<6}  {ah:<4} | {gm} | {gs}")


if __name__ == "__main__":
    main()
