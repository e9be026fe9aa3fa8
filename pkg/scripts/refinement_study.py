"""Grid refinement on a 5-year scenario: values at successive halvings of h."""

import argparse
import math

from tailrisk_dc import precommit, timeconsistent
from tailrisk_dc.dp_core import Scenario, StepOperators
from tailrisk_dc.kou import PAPER_PARAMS, DensityConfig
from tailrisk_dc.lattice import GridSpec, build
from tailrisk_dc.risk import RiskSpec


def grid(level: int) -> GridSpec:
    n_y_dag, n = 128 * 2**level, 16 * 2**level
    return GridSpec.centered(math.log(1.0e5), inner=6.0, outer=12.0, b_max=1.0e8, w_threshold_max=1.0e8,
                             n_y=n_y_dag // 2, n_y_dag=n_y_dag, n_b=n, n_w=n, n_u=n,
                             n_policy_wealth=400 * 2**level, spacing="sinh", spacing_scale=2.0e4)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--gamma", type=float, default=1.0)
    args = ap.parse_args()
    sc = Scenario(T=5.0, M=5, q=20000.0, W0=0.0)
    spec = RiskSpec.cvar(0.05, args.gamma)
    prev = {}
    print(f"{'level':>5s} {'n_y':>5s} {'n_b':>4s} {'V_pc':>12s} {'|dV_pc|':>10s} {'V_tc':>12s} {'|dV_tc|':>10s}")
    for level in range(args.levels):
        lat = build(grid(level))
        ops = StepOperators(lat, PAPER_PARAMS, sc, DensityConfig(12, 1.0))
        v = {"pc": precommit.solve(spec, sc, lat, PAPER_PARAMS, ops=ops).value_at_inception,
             "tc": timeconsistent.solve(spec, sc, lat, PAPER_PARAMS, ops=ops).value_at_inception}
        d = {k: abs(v[k] - prev[k]) if prev else float("nan") for k in v}
        print(f"{level:5d} {lat.spec.n_y_dag:5d} {lat.spec.n_b:4d} {v['pc']:12.2f} {d['pc']:10.2f} "
              f"{v['tc']:12.2f} {d['tc']:10.2f}")
        prev = v


if __name__ == "__main__":
    main()
