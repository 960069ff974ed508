"""Command-line entry point.

Usage::

    crowdroute <subcommand> [--config FILE] [--seed N] [--outdir DIR] [--threads K]
    crowdroute replay OUTPUT.json [--outdir DIR]

Each run writes ``<outdir>/<subcommand>.csv`` and ``<outdir>/<subcommand>.json``.
Exit status is 0 on success, 1 on a validation error and 2 when a ``poa-*``
report violates its bound.

CSV schemas (version 1; floats printed with 17 significant digits):

``simulate``
    run, t, action, disclosed, report, latency, ell0, ell_1..ell_N, x_1..x_N
    (``report`` is -1 without a report, else 1 for hazard and 0 for none)
``threshold-sweep``
    x, ell_m, ell_star
``poa-myopic`` / ``poa-sid``
    rho, epsilon, truncation, numerator, denominator, ratio, bound, satisfied
``poa-hiding``
    rho, ell1, truncation, numerator, denominator, ratio, bound, satisfied
``inefficiency``
    n_risky, run, cost_<policy>..., cost_optimal

The JSON file holds ``manifest`` (config path, subcommand, seed, outdir,
version, timestamp), the fully resolved ``config`` and a ``summary``.
``crowdroute replay`` re-runs from that file and reproduces the CSV byte for
byte.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from typing import Any, Callable, Optional

import numpy as np
import yaml

from . import __version__
from ._backend import BACKEND
from .config import ConfigError, RunConfig, from_mapping
from .experiments import (
    paired_costs,
    ratio_of_means,
    run_rng,
    run_trajectory,
    threshold_sweep,
    worstcase_hiding,
    worstcase_myopic,
    worstcase_sid,
)
from .model import LatencyDivergenceError, Outcome, stationary_belief
from .planner import PlannerError, PlanResult, belief_crossing, lemma2_holds
from .policies import PolicyKind, PolicySpec

SCHEMA_VERSION = 1
SUBCOMMANDS = ("simulate", "threshold-sweep", "poa-myopic", "poa-hiding", "poa-sid",
               "inefficiency")
SEEDED = ("simulate", "inefficiency")
DEFAULT_RHO_GRID = tuple(k / 10 for k in range(1, 10))

EXIT_OK, EXIT_INVALID, EXIT_BOUND = 0, 1, 2
HELP = {
    "simulate": "Monte Carlo trajectories for one policy",
    "threshold-sweep": "myopic and optimal exploration thresholds over a belief grid",
    "poa-myopic": "worst-case myopic cost ratio per discount factor",
    "poa-hiding": "worst-case hiding cost ratio per latency and discount factor",
    "poa-sid": "worst-case SID cost ratio per discount factor",
    "inefficiency": "paired-seed cost ratios against the optimal policy",
}


@dataclass(frozen=True)
class RunManifest:
    config_path: Optional[str]
    subcommand: str
    seed: Optional[int]
    outdir: str
    version: str
    timestamp: str


@dataclass
class Result:
    header: list[str]
    rows: list[list[Any]]
    summary: dict
    status: int = EXIT_OK


def _cell(v: Any) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: str, header: list[str], rows: list[list[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


# -- subcommands ---------------------------------------------------------------

def _policy(name: str, cfg: RunConfig) -> PolicySpec:
    kind = PolicyKind(name)
    needs = kind in (PolicyKind.SOCIAL_OPTIMAL, PolicyKind.SID)
    return PolicySpec(kind, cfg.planner if needs else None)


def cmd_simulate(cfg: RunConfig, threads: int) -> Result:
    net, e = cfg.network, cfg.experiment
    state = cfg.initial_state()
    policy = _policy(e.policy, cfg)
    n = net.n_risky
    header = (["run", "t", "action", "disclosed", "report", "latency", "ell0"]
              + [f"ell_{i}" for i in range(1, n + 1)] + [f"x_{i}" for i in range(1, n + 1)])
    rows, costs, cache = [], [], {}
    for run in range(e.runs):
        rec = run_trajectory(net, policy, state, e.horizon, run_rng(e.seed, run), e.mode,
                             cache, e.latency_limit)
        costs.append(rec.cost)
        for s in rec.steps:
            seen = s.observation.observed()
            report = -1 if seen is None else int(seen[1] is Outcome.HAZARD)
            rows.append([run, s.t, s.action, s.disclosed, report, s.latency, s.state.ell0,
                         *s.state.ell_risky, *s.state.beliefs])
    return Result(header, rows, {"policy": e.policy, "costs": costs,
                                 "mean_cost": float(np.mean(costs))})


def cmd_threshold_sweep(cfg: RunConfig, threads: int) -> Result:
    net, e = cfg.network, cfg.experiment
    template = cfg.initial_state()
    if template.n_risky != 1:
        raise ConfigError("n_risky", "threshold-sweep needs exactly one risky path")
    grid = np.linspace(e.x_min, e.x_max, e.x_points)
    probes: list = []
    rows = threshold_sweep(net, template, grid, cfg.planner, probes)
    crossing = belief_crossing(net, template, e.grid_resolution, cfg.planner,
                               e.crossing_tol, probes)
    violations = 0
    for s, qs in probes:
        a = min(range(len(qs)), key=lambda k: (qs[k], k))
        violations += not lemma2_holds(s, PlanResult(qs[a], a, qs), net)
    return Result(["x", "ell_m", "ell_star"], [list(r) for r in rows], {
        "crossing": asdict(crossing),
        "stationary_belief": stationary_belief(net),
        "indifference_belief": net.indifference_belief,
        "probes": len(probes),
        "lemma2_violations": int(violations),
    })


def _rhos(cfg: RunConfig) -> tuple[float, ...]:
    if cfg.experiment.rho_values is not None:
        return cfg.experiment.rho_values
    if cfg.network is not None:
        return (cfg.network.rho,)
    return DEFAULT_RHO_GRID


def _poa(reports: list, keys: tuple[str, str]) -> Result:
    header = ["rho", keys[1], "truncation", "numerator", "denominator", "ratio", "bound",
              "satisfied"]
    rows = [[r.params["rho"], r.params[keys[0]], r.params["truncation"], r.numerator,
             r.denominator, r.ratio, r.bound, r.satisfied] for r in reports]
    ok = all(r.satisfied for r in reports)
    return Result(header, rows, {"reports": [r.as_dict() for r in reports],
                                 "all_satisfied": ok},
                  EXIT_OK if ok else EXIT_BOUND)


def cmd_poa_myopic(cfg: RunConfig, threads: int) -> Result:
    e = cfg.experiment
    kw = {"tail": e.tail} if e.epsilon is None else {"tail": e.tail, "epsilon": e.epsilon}
    return _poa([worstcase_myopic(r, **kw) for r in _rhos(cfg)], ("epsilon", "epsilon"))


def cmd_poa_hiding(cfg: RunConfig, threads: int) -> Result:
    e = cfg.experiment
    d_ell = cfg.network.delta_ell if cfg.network is not None else 1.0
    reports = []
    for r in _rhos(cfg):
        reports += worstcase_hiding(r, e.ell1_values, d_ell, e.tail)
    return _poa(reports, ("ell1", "ell1"))


def cmd_poa_sid(cfg: RunConfig, threads: int) -> Result:
    e = cfg.experiment
    kw = {"tail": e.tail} if e.epsilon is None else {"tail": e.tail, "epsilon": e.epsilon}
    return _poa([worstcase_sid(r, **kw) for r in _rhos(cfg)], ("epsilon", "epsilon"))


def cmd_inefficiency(cfg: RunConfig, threads: int) -> Result:
    net, e = cfg.network, cfg.experiment
    ns = e.n_risky_values or (net.n_risky,)
    names = [p for p in e.policies if p != "optimal"]
    header = ["n_risky", "run"] + [f"cost_{p}" for p in names] + ["cost_optimal"]
    rows, gammas = [], {}
    for n in ns:
        ncfg = net.with_(n_risky=n)
        specs = [_policy(p, cfg) for p in names] + [_policy("optimal", cfg)]
        costs = paired_costs(ncfg, specs, cfg.initial_state(n), e.runs, e.horizon, e.seed,
                             e.mode, threads, {}, e.latency_limit)
        opt = costs[-1]
        for run in range(e.runs):
            rows.append([n, run, *(c[run] for c in costs)])
        per = {}
        for p, c in zip(names, costs):
            g, se = ratio_of_means(c, opt)
            per[p] = {"gamma": g, "stderr": se}
        per["optimal"] = {"gamma": 1.0, "stderr": 0.0}
        gammas[str(n)] = per
    return Result(header, rows, {"gamma": gammas, "runs": e.runs})


COMMANDS: dict[str, Callable[[RunConfig, int], Result]] = {
    "simulate": cmd_simulate,
    "threshold-sweep": cmd_threshold_sweep,
    "poa-myopic": cmd_poa_myopic,
    "poa-hiding": cmd_poa_hiding,
    "poa-sid": cmd_poa_sid,
    "inefficiency": cmd_inefficiency,
}


# -- plumbing ----------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crowdroute", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name, help=HELP[name])
        s.add_argument("--config", help="flat YAML configuration file")
        s.add_argument("--seed", type=int, help="master seed (overrides the config)")
        s.add_argument("--outdir", default=".", help="output directory")
        s.add_argument("--threads", type=int, default=1, help="parallel Monte Carlo runs")
        s.add_argument("--rho", type=float, help="discount factor override (poa-*: a single rho)")
        s.add_argument("--horizon", type=int, help="simulation steps override")
        s.add_argument("--runs", type=int, help="Monte Carlo runs override")
        s.add_argument("--policy", help="policy override for simulate")
    r = sub.add_parser("replay", help="re-run from an emitted JSON file")
    r.add_argument("json_file")
    r.add_argument("--outdir", help="output directory (default: the recorded one)")
    r.add_argument("--threads", type=int, default=1)
    return p


def _load_raw(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None
    except yaml.YAMLError as exc:
        raise ConfigError("--config", f"not valid YAML: {exc}") from None
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError("<document>", "expected a mapping of flat keys")
    return raw


def run(subcommand: str, raw: dict, outdir: str, config_path: Optional[str],
        threads: int = 1) -> int:
    """Validate, dispatch and write outputs; returns the exit status."""
    if threads < 1:
        raise ConfigError("--threads", "must be >= 1")
    needs_network = not subcommand.startswith("poa-")
    cfg = from_mapping(raw, require_network=needs_network)
    seed = cfg.experiment.seed
    if subcommand in SEEDED and seed is None:
        raise ConfigError("seed", "no seed given in the config or via --seed")
    try:
        os.makedirs(outdir, exist_ok=True)
    except OSError as exc:
        raise ConfigError("--outdir", str(exc)) from None
    if not os.access(outdir, os.W_OK):
        raise ConfigError("--outdir", f"{outdir} is not writable")

    result = COMMANDS[subcommand](cfg, threads)
    manifest = RunManifest(config_path, subcommand, seed, outdir, __version__,
                           datetime.now(timezone.utc).isoformat())
    write_csv(os.path.join(outdir, f"{subcommand}.csv"), result.header, result.rows)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "manifest": asdict(manifest),
        "config": cfg.to_dict(),
        "backend": BACKEND,
        "threads": threads,
        "exit_status": result.status,
        "summary": result.summary,
    }
    with open(os.path.join(outdir, f"{subcommand}.json"), "w") as fh:
        json.dump(doc, fh, indent=2, allow_nan=True)
        fh.write("\n")
    return result.status


def main(argv: Optional[list[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.subcommand == "replay":
            with open(args.json_file) as fh:
                doc = json.load(fh)
            m = doc["manifest"]
            status = run(m["subcommand"], doc["config"], args.outdir or m["outdir"],
                         m["config_path"], args.threads)
        else:
            raw = _load_raw(args.config)
            for key in ("seed", "horizon", "runs", "policy"):
                v = getattr(args, key)
                if v is not None:
                    raw[key] = v
            if args.rho is not None:
                # poa-* constructions fix their own network; only the grid changes
                raw["rho_values" if args.subcommand.startswith("poa-") else "rho"] = (
                    [args.rho] if args.subcommand.startswith("poa-") else args.rho)
            status = run(args.subcommand, raw, args.outdir, args.config, args.threads)
    except (ConfigError, PlannerError, LatencyDivergenceError, ValueError, OSError,
            KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if status == EXIT_BOUND:
        print("bound violated; see the JSON summary", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
