#!/usr/bin/env python3
"""Desk-scale trend study: objective vs segment count, interpolation factor,
and kept basis paths, plus trajectory-block wall time per scheme.

Writes one tidy CSV (axis,value,seed,objective,block_s) and prints medians.
"""
import argparse
import csv
import sys
from pathlib import Path
from statistics import median

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from flexpath import (
    CpdScheme,
    FpdPcScheme,
    FpdScheme,
    ProblemSpec,
    SolverConfig,
    bcd_solve,
    derive_segment_bounds,
)
from flexpath.bench import RunConfig, resolve_spec

CHANNEL = {
    "tx_power_w": 0.1,
    "beta0_db": -30.0,
    "noise_dbw": -90.0,
    "h_min_m": 100.0,
    "v_max_mps": 20.0,
    "period_s": 50.0,
}
ERROR_BUDGET = 2.0
DENSITY_N = (20, 40, 80)
INTERP_J = (1, 2, 4)
BAND_K = (3, 6, 12)


def scenario_for(seed: int, num_sensors: int, side_m: float):
    cfg = {
        "seed": seed,
        "scenario": dict(CHANNEL, generator={"count": num_sensors, "side_m": side_m}),
        "scheme": {"type": "cpd", "num_segments": 4},
        "accuracy": {"error_budget": ERROR_BUDGET},
    }
    run_cfg = RunConfig.from_dict(cfg)
    spec, derived = resolve_spec(run_cfg)
    return run_cfg.scenario, derived["delta_used_m"]


def solve_one(scen, scheme, dmax, solver_cfg):
    sol = bcd_solve(ProblemSpec(scen, scheme, dmax, solver_cfg))
    return sol.objective, sol.block_seconds.get("waypoints", 0.0)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5, help="number of sensor layouts")
    ap.add_argument("--sensors", type=int, default=5)
    ap.add_argument("--side", type=float, default=200.0, help="field side, meters")
    ap.add_argument("--out", default="trends.csv")
    args = ap.parse_args()

    cfg = SolverConfig()
    timed_cfg = SolverConfig(bcd_max_iters=6, sca_max_iters=3, bcd_rel_tol=0.0, sca_rel_tol=0.0)
    rows = []

    for seed in range(args.seeds):
        scen, dmax = scenario_for(seed, args.sensors, args.side)
        for n in DENSITY_N:
            obj, _ = solve_one(scen, FpdScheme(n // 2, 2), dmax, cfg)
            rows.append(("density_n", n, seed, obj, ""))
        for j in INTERP_J:
            obj, _ = solve_one(scen, FpdScheme(40 // j, j), dmax, cfg)
            rows.append(("interp_j", j, seed, obj, ""))
        for k in BAND_K:
            for sel in ("lfb", "hfb"):
                obj, _ = solve_one(scen, FpdPcScheme(20, 2, keep=k, selection=sel), dmax, cfg)
                rows.append((f"keep_k_{sel}", k, seed, obj, ""))
        # fixed iteration budget so block seconds compare like for like
        for name, scheme in (
            ("block_s_pc6", FpdPcScheme(20, 2, keep=6)),
            ("block_s_fpd20", FpdScheme(20, 2)),
            ("block_s_cpd40", CpdScheme(40)),
        ):
            obj, secs = solve_one(scen, scheme, dmax, timed_cfg)
            rows.append((name, "", seed, obj, secs))

    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["axis", "value", "seed", "objective_bps_hz", "waypoint_block_s"])
        w.writerows(rows)

    print(f"{len(rows)} rows -> {args.out}")
    for axis in dict.fromkeys(r[0] for r in rows):
        sub = [r for r in rows if r[0] == axis]
        if axis.startswith("block_s"):
            print(f"  {axis}: median {median(r[4] for r in sub):.4f} s")
        else:
            for val in dict.fromkeys(r[1] for r in sub):
                objs = [r[3] for r in sub if r[1] == val]
                print(f"  {axis}={val}: median objective {median(objs):.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
