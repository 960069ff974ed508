"""Compiled versus pure-Python expectimax kernel.

    python benchmarks/bench_planner.py [--repeat 3]

Times one root evaluation per (N, horizon) on the Fig. 3 start state and
checks that both kernels return the same Q-values bit for bit.
"""
import argparse
import time

from crowdroute import _backend
from crowdroute.experiments import fig3_config, fig3_state
from crowdroute.planner import PlannerConfig, root_q_values

CASES = [(1, 8), (2, 6), (3, 5), (5, 4), (5, 6)]


def best_time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if "compiled" not in _backend.KERNELS:
        raise SystemExit("compiled kernel not built; run `pip install -e .` first")
    print(f"{'N':>2} {'T':>2} {'nodes':>9} {'python s':>10} {'compiled s':>11} {'speedup':>8}")
    for n, h in CASES:
        cfg, s, pcfg = fig3_config(n), fig3_state(n), PlannerConfig(horizon=h)
        py = root_q_values(s, cfg, pcfg, "python")
        c = root_q_values(s, cfg, pcfg, "compiled")
        if py != c:
            raise SystemExit(f"kernels disagree at N={n}, T={h}: {py} vs {c}")
        tp = best_time(lambda: root_q_values(s, cfg, pcfg, "python"), args.repeat)
        tc = best_time(lambda: root_q_values(s, cfg, pcfg, "compiled"), args.repeat)
        print(f"{n:>2} {h:>2} {c[1]:>9} {tp:>10.4f} {tc:>11.5f} {tp / tc:>8.1f}")


if __name__ == "__main__":
    main()
