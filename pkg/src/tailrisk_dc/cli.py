"""Command line entry point: ``python -m tailrisk_dc <command> ...``.

Every command writes its artifacts into ``--out`` together with a
``manifest.json`` that records the config hash and library version for
each file.  Failures print a JSON error document on stderr and exit with a
nonzero status.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import replace
from typing import Optional

import numpy as np

from . import __version__
from .config import GRID_PRESETS, RunConfig, load_config
from .frontier import map_bpoe_to_cvar, map_cvar_to_bpoe
from .io import read_json, read_policy, write_frontier, write_heatmap, write_histogram, write_json, write_policy
from .montecarlo import histogram, standard_error, write_samples
from .risk import RiskSpec
from .runner import Runner

log = logging.getLogger("tailrisk_dc")

DEFAULT_ALPHA = 0.05
DEFAULT_D = 668810.0


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--grid", choices=sorted(GRID_PRESETS), help="grid preset override")
    p.add_argument("--out", help="output directory (defaults to the config's output_dir)")
    p.add_argument("--paths", type=int, help="Monte Carlo paths")
    p.add_argument("--seed", type=int, help="Monte Carlo seed")


def _risk_args(p: argparse.ArgumentParser, kind: str) -> None:
    if kind == "cvar":
        p.add_argument("--alpha", type=float)
        p.add_argument("--gamma", type=float, help="gamma_a")
    else:
        p.add_argument("--D", type=float, help="disaster level in dollars")
        p.add_argument("--gamma", type=float, help="gamma_o in dollars")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="tailrisk_dc", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, kind in (("solve-pcma", "cvar"), ("solve-pcmo", "bpoe"),
                       ("solve-tcma", "cvar"), ("solve-tcmo", "bpoe")):
        p = sub.add_parser(name, help=f"{name[6:].upper()} solver")
        _common(p)
        _risk_args(p, kind)
        p.add_argument("--mc", action="store_true", help="also evaluate the policy by simulation")
        p.add_argument("--report-D", type=float, help="D for the reported bPoE (CVaR solvers)")

    p = sub.add_parser("evaluate", help="simulate a stored policy")
    _common(p)
    p.add_argument("--policy", required=True)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--D", type=float, default=DEFAULT_D)
    p.add_argument("--dump", help="write terminal wealth samples (little-endian float64)")
    p.add_argument("--bin-width", type=float, default=5.0e4)

    p = sub.add_parser("frontier", help="sweep the scalarization weight")
    _common(p)
    p.add_argument("--solver", choices=["pcma", "pcmo", "tcma", "tcmo"], default="pcma")
    p.add_argument("--gammas", required=True, help="comma separated gamma values")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--D", type=float, default=DEFAULT_D)

    p = sub.add_parser("map-params", help="map a precommitment solution to the other risk measure")
    p.add_argument("--solution", required=True)
    p.add_argument("--use-mc", action="store_true",
                   help="use the simulated VaR/CVaR (or bPoE) instead of the DP values")
    p.add_argument("--out")

    p = sub.add_parser("match-gamma", help="find gamma_a whose TCMa expectation hits a target")
    _common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--target-E", type=float)
    src.add_argument("--solution", help="solution JSON whose expectation is the target")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--bracket", default="0.05,50")
    p.add_argument("--rel-tol", type=float, default=1e-3)
    return ap


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    changes = {}
    if getattr(args, "grid", None):
        changes["grid"] = GRID_PRESETS[args.grid]()
    if getattr(args, "out", None):
        changes["output_dir"] = args.out
    sim = cfg.sim
    if getattr(args, "paths", None) is not None:
        sim = replace(sim, n_paths=args.paths)
    if getattr(args, "seed", None) is not None:
        sim = replace(sim, seed=args.seed)
    changes["sim"] = sim
    return replace(cfg, **changes)


def _risk_from_args(args, cfg: RunConfig, kind: str) -> RiskSpec:
    base = cfg.risk if cfg.risk is not None and cfg.risk.kind == kind else None
    if kind == "cvar":
        alpha = args.alpha if args.alpha is not None else (base.alpha if base else DEFAULT_ALPHA)
        gamma = args.gamma if args.gamma is not None else (base.gamma_a if base else None)
        if gamma is None:
            raise CliError("gamma_a missing: pass --gamma or set risk in the config")
        return RiskSpec.cvar(alpha, gamma)
    D = args.D if args.D is not None else (base.D if base else None)
    gamma = args.gamma if args.gamma is not None else (base.gamma_o if base else None)
    if D is None or gamma is None:
        raise CliError("D and gamma_o missing: pass --D/--gamma or set risk in the config")
    return RiskSpec.bpoe(D, gamma)


class Artifacts:
    def __init__(self, out_dir: str, cfg_hash: str):
        os.makedirs(out_dir, exist_ok=True)
        self.dir = out_dir
        self.stamp = {"config_hash": cfg_hash, "version": __version__}
        self.files = []

    def path(self, name: str) -> str:
        self.files.append(name)
        return os.path.join(self.dir, name)

    def json(self, name: str, body: dict) -> None:
        write_json(self.path(name), {**self.stamp, **body})

    def close(self) -> None:
        write_json(os.path.join(self.dir, "manifest.json"), {**self.stamp, "files": self.files})


def _stats_body(stats, samples) -> dict:
    return {**stats.to_dict(), "mean_standard_error": standard_error(samples)}


def cmd_solve(args) -> dict:
    solver = args.command.split("-", 1)[1]
    kind = "cvar" if solver.endswith("a") else "bpoe"
    cfg = _config(args)
    risk = _risk_from_args(args, cfg, kind)
    cfg = replace(cfg, risk=risk)
    runner = Runner(cfg)
    t0 = time.perf_counter()
    sol = runner.solve(solver, risk)
    log.info("%s solved in %.1f s", solver, time.perf_counter() - t0)

    art = Artifacts(cfg.output_dir, cfg.hash())
    body = {"config": cfg.to_dict(), **sol.summary(),
            "thousands": {"expected_terminal_wealth": sol.expected_terminal_wealth / 1e3,
                          "optimal_threshold": sol.optimal_threshold / 1e3}}
    if kind == "cvar":
        body["thousands"]["risk_value"] = sol.risk_value / 1e3
    if args.mc:
        alpha = risk.alpha if kind == "cvar" else DEFAULT_ALPHA
        D = risk.D if kind == "bpoe" else (args.report_D or DEFAULT_D)
        stats, samples = runner.evaluate(sol.policy, alpha, D)
        body["monte_carlo"] = _stats_body(stats, samples)
    art.json("solution.json", body)
    write_policy(art.path("policy.json"), sol.policy, extra_meta=art.stamp)
    write_heatmap(art.path("heatmap_control.csv"), sol.policy.times, sol.policy.wealth, sol.policy.u)
    if sol.policy.threshold is not None:
        write_heatmap(art.path("heatmap_threshold.csv"), sol.policy.times, sol.policy.wealth,
                      sol.policy.threshold)
    art.close()
    return {"command": args.command, "out": cfg.output_dir, **sol.summary()}


def cmd_evaluate(args) -> dict:
    cfg = _config(args)
    policy = read_policy(args.policy)
    if policy.n_times != cfg.scenario.M:
        raise CliError(f"policy has {policy.n_times} rebalance times, scenario has {cfg.scenario.M}")
    stats, samples = Runner(cfg).evaluate(policy, args.alpha, args.D)
    art = Artifacts(cfg.output_dir, cfg.hash())
    art.json("stats.json", {"config": cfg.to_dict(), "policy": os.path.abspath(args.policy),
                            "alpha": args.alpha, "D": args.D, **_stats_body(stats, samples)})
    centers, dens = histogram(samples, args.bin_width)
    write_histogram(art.path("histogram.csv"), centers, dens)
    if args.dump:
        write_samples(args.dump, samples)
    art.close()
    return {"command": "evaluate", "out": cfg.output_dir, **stats.to_dict()}


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise CliError(f"cannot parse number list {text!r}") from exc


def cmd_frontier(args) -> dict:
    cfg = _config(args)
    gammas = _floats(args.gammas)
    template = (RiskSpec.cvar(args.alpha, 1.0) if args.solver.endswith("a")
                else RiskSpec.bpoe(args.D, 1.0))
    points = Runner(cfg).frontier(args.solver, template, gammas)
    art = Artifacts(cfg.output_dir, cfg.hash())
    write_frontier(art.path("frontier.csv"), points)
    art.close()
    return {"command": "frontier", "out": cfg.output_dir, "points": [p.to_dict() for p in points]}


def map_solution(doc: dict, use_mc: bool = False) -> dict:
    """Apply the CVaR <-> bPoE parameter map to a precommitment solution document."""
    spec = doc.get("spec")
    if spec is None:
        raise CliError("solution JSON lacks a 'spec' section")
    W_star = float(doc["optimal_threshold"])
    mc = doc.get("monte_carlo") if use_mc else None
    if use_mc and mc is None:
        raise CliError("--use-mc given but the solution has no monte_carlo section")
    if spec["kind"] == "cvar":
        C = float(mc["cvar_alpha"]) if mc else float(doc["risk_value"])
        W = float(mc["var_alpha"]) if mc else W_star
        D, gamma_o = map_cvar_to_bpoe(spec["alpha"], spec["gamma_a"], W, C)
        return {"kind": "bpoe", "D": D, "gamma_o": gamma_o,
                "D_thousands": D / 1e3, "gamma_o_thousands": gamma_o / 1e3,
                "source": {"alpha": spec["alpha"], "gamma_a": spec["gamma_a"],
                           "threshold": W, "cvar": C}}
    B = float(mc["bpoe_d"]) if mc else float(doc["risk_value"])
    W = float(mc["var_alpha"]) if mc else W_star
    alpha, gamma_a = map_bpoe_to_cvar(spec["D"], spec["gamma_o"], W, B)
    return {"kind": "cvar", "alpha": alpha, "gamma_a": gamma_a,
            "source": {"D": spec["D"], "gamma_o": spec["gamma_o"], "threshold": W, "bpoe": B}}


def cmd_map_params(args) -> dict:
    doc = read_json(args.solution)
    mapped = map_solution(doc, args.use_mc)
    body = {"command": "map-params", "solution": os.path.abspath(args.solution), **mapped}
    if args.out:
        art = Artifacts(args.out, doc.get("config_hash", ""))
        art.json("mapped.json", body)
        art.close()
    return body


def cmd_match_gamma(args) -> dict:
    cfg = _config(args)
    if args.solution:
        target = float(read_json(args.solution)["expected_terminal_wealth"])
    else:
        target = args.target_E
    lo, hi = _floats(args.bracket)
    res = Runner(cfg).match_gamma(target, args.alpha, (lo, hi), args.rel_tol)
    body = {"command": "match-gamma", "target_E": target, "gamma_a": res.gamma,
            "expectation": res.expectation, "iterations": res.iterations,
            "history": [list(h) for h in res.history]}
    art = Artifacts(cfg.output_dir, cfg.hash())
    art.json("match_gamma.json", body)
    art.close()
    return body


COMMANDS = {
    "solve-pcma": cmd_solve, "solve-pcmo": cmd_solve, "solve-tcma": cmd_solve,
    "solve-tcmo": cmd_solve, "evaluate": cmd_evaluate, "frontier": cmd_frontier,
    "map-params": cmd_map_params, "match-gamma": cmd_match_gamma,
}


def _error(exc: BaseException, command: Optional[str]) -> int:
    doc = {"error": {"type": type(exc).__name__, "message": str(exc), "command": command}}
    print(json.dumps(doc), file=sys.stderr)
    return 2 if isinstance(exc, (CliError, ValueError, KeyError, FileNotFoundError)) else 1


def main(argv=None) -> int:
    command = None
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        result = COMMANDS[command](args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except Exception as exc:
        return _error(exc, command)
    print(json.dumps(result, default=_jsonable))
    return 0


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)
