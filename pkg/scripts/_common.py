"""Shared helpers for the experiment scripts."""

import argparse
import logging
import os

from tailrisk_dc.config import GRID_PRESETS, RunConfig, SimConfig


def base_parser(description: str) -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--grid", choices=sorted(GRID_PRESETS), default="desk")
    ap.add_argument("--paths", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=SimConfig().seed)
    ap.add_argument("--out", default="results")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from(args) -> RunConfig:
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    os.makedirs(args.out, exist_ok=True)
    return RunConfig(grid=GRID_PRESETS[args.grid](), sim=SimConfig(n_paths=args.paths, seed=args.seed),
                     output_dir=args.out)


def row(label: str, stats, threshold=None) -> str:
    k = 1e3
    thr = f"{threshold / k:9.2f}" if threshold is not None else " " * 9
    return (f"{label:6s} {stats.mean / k:9.2f} {stats.cvar_alpha / k:8.2f} {stats.bpoe_d:7.2%} {thr} "
            f"{stats.p5 / k:8.2f} {stats.p50 / k:8.2f} {stats.p95 / k:8.2f}")


HEADER = (f"{'':6s} {'E[W_T]':>9s} {'CVaR':>8s} {'bPoE':>7s} {'W*':>9s} {'p5':>8s} {'p50':>8s} {'p95':>8s}"
          "   (thousands)")
