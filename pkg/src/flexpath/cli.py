"""Command-line front end.

Subcommands: run, sweep, bounds, compress. Exit codes: 0 success, 2 config
error, 3 infeasible instance, 4 solver degradation (outputs still written).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .basis import (
    CompressionError,
    DecompositionError,
    SELECTIONS,
    compress,
    fourier_basis,
    shifted_sine_basis,
)
from .bench import ConfigError, RunConfig, emit, resolve_spec, run, sweep
from .conic import ConicSolveError
from .solver import InfeasibleDurationsError, InitializationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_DEGRADED = 4

INFEASIBLE_ERRORS = (InitializationError, InfeasibleDurationsError, ConicSolveError)


def _common_flags(p: argparse.ArgumentParser, need_config: bool = True) -> None:
    p.add_argument("--config", required=need_config, help="path to a JSON run config")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv", dest="fmt")
    p.add_argument("--parallel", type=int, default=1, help="worker processes for sweeps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flexpath",
        description="Trajectory discretization, compression, and max-min harvesting design.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="solve one config and write results")
    _common_flags(p_run)

    p_sweep = sub.add_parser("sweep", help="solve one config across an axis of values")
    _common_flags(p_sweep)
    p_sweep.add_argument("--axis", required=True, help="one of n_fpd, j, k, scheme")
    p_sweep.add_argument(
        "--values", required=True,
        help="comma-separated axis values, e.g. 20,40,80 or td,cpd,fpd",
    )

    p_bounds = sub.add_parser("bounds", help="print the derived accuracy chain as JSON")
    p_bounds.add_argument("--config", required=True)
    p_bounds.add_argument("--seed", type=int, default=None)

    p_comp = sub.add_parser("compress", help="compress a trajectory CSV onto a basis")
    p_comp.add_argument("--traj", required=True, help="CSV with index,x_m,y_m,z_m,duration_s")
    p_comp.add_argument("--basis", choices=("fourier", "shifted-sine"), default="fourier")
    p_comp.add_argument("--keep", type=int, required=True, help="rows to keep (K)")
    p_comp.add_argument("--selection", choices=SELECTIONS, default="lfb")
    p_comp.add_argument("--fit", choices=("lstsq", "truncate"), default="lstsq")
    p_comp.add_argument("--out", default="out")
    return parser


def _cmd_run(args) -> int:
    config = RunConfig.from_file(args.config, seed_override=args.seed)
    record = run(config)
    paths = emit([record], args.fmt, args.out)
    print(f"run {record.run_id}: objective {record.objective:.6g} bps/Hz, "
          f"status {record.status}, {len(paths)} files in {args.out}")
    return EXIT_DEGRADED if record.status == "degraded" else EXIT_OK


def _parse_values(axis: str, raw: str) -> list:
    vals = [v.strip() for v in raw.split(",") if v.strip()]
    if not vals:
        raise ConfigError("--values must list at least one value")
    if axis == "scheme":
        return vals
    try:
        return [int(v) for v in vals]
    except ValueError as e:
        raise ConfigError(f"--values for axis {axis!r} must be integers: {e}") from e


def _cmd_sweep(args) -> int:
    config = RunConfig.from_file(args.config, seed_override=args.seed)
    values = _parse_values(args.axis, args.values)
    records = sweep(config, args.axis, values, parallel=max(1, args.parallel))
    paths = emit(records, args.fmt, args.out)
    done = sum(1 for r in records if r.status in ("ok", "degraded"))
    print(f"sweep {args.axis}={values}: {done}/{len(records)} solved, "
          f"{len(paths)} files in {args.out}")
    for r in records:
        tag = f"{args.axis}={r.config.get('sweep', {}).get('value')}"
        if r.status == "failed":
            print(f"  {tag}: FAILED ({r.error})")
        else:
            print(f"  {tag}: objective {r.objective:.6g}, status {r.status}")
    if any(r.status == "degraded" for r in records):
        return EXIT_DEGRADED
    if all(r.status == "failed" for r in records):
        return EXIT_INFEASIBLE
    return EXIT_OK


def _cmd_bounds(args) -> int:
    config = RunConfig.from_file(args.config, seed_override=args.seed)
    _, derived = resolve_spec(config)
    print(json.dumps(derived, indent=2, sort_keys=True))
    return EXIT_OK


def _read_traj_csv(path: str) -> np.ndarray:
    try:
        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            cols = ("x_m", "y_m", "z_m")
            if reader.fieldnames is None or any(c not in reader.fieldnames for c in cols):
                raise ConfigError(f"{path} must have columns index,x_m,y_m,z_m,duration_s")
            rows = [[float(row[c]) for c in cols] for row in reader]
    except OSError as e:
        raise ConfigError(f"cannot read trajectory {path}: {e}") from e
    except (ValueError, KeyError) as e:
        raise ConfigError(f"bad trajectory row in {path}: {e}") from e
    if len(rows) < 3:
        raise ConfigError(f"{path}: need at least 3 waypoints to compress")
    return np.asarray(rows, dtype=float).T


def _cmd_compress(args) -> int:
    points = _read_traj_csv(args.traj)
    order = points.shape[1] - 1
    try:
        basis = shifted_sine_basis(order) if args.basis == "shifted-sine" else fourier_basis(order)
        result = compress(points, basis, keep=args.keep, selection=args.selection, fit=args.fit)
    except (ValueError, DecompositionError, CompressionError) as e:
        raise ConfigError(str(e)) from e

    recon = result.reconstruct()
    denom = float(np.linalg.norm(points))
    rel_err = float(np.linalg.norm(recon - points)) / denom if denom > 0 else 0.0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.traj).stem
    meta = {
        "source": str(args.traj),
        "basis": args.basis,
        "order": order,
        "keep": args.keep,
        "selection": args.selection,
        "fit": args.fit,
        "selected_indices": [int(i) for i in result.selected_indices],
        "compression_ratio": result.compression_ratio,
        "frobenius_rel_error": rel_err,
        "coeffs": result.coeffs.tolist(),
    }
    meta_path = out / f"compressed_{stem}.json"
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    recon_path = out / f"reconstructed_{stem}.csv"
    with recon_path.open("w") as f:
        f.write("index,x_m,y_m,z_m\n")
        for i in range(recon.shape[1]):
            f.write(f"{i},{recon[0, i]!r},{recon[1, i]!r},{recon[2, i]!r}\n")
    print(json.dumps({
        "keep": args.keep,
        "order": order,
        "compression_ratio": result.compression_ratio,
        "frobenius_rel_error": rel_err,
        "files": [str(meta_path), str(recon_path)],
    }, indent=2))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "bounds": _cmd_bounds,
        "compress": _cmd_compress,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except INFEASIBLE_ERRORS as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
