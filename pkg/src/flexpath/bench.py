"""Config-driven runs, sweeps, and result emission.

Configs are JSON (see docs/config.schema.json); decibel fields are converted
to linear units here and nowhere else. Every run is deterministic given
(config, seed): sensor layouts come from a named PRNG recorded in the
RunRecord, and the solver stack has no hidden randomness.
"""
from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .model import Position3, Scenario
from .discretize import derive_segment_bounds, make_td_grid, min_segment_count
from .solver import (
    CpdScheme,
    FpdPcScheme,
    FpdScheme,
    ProblemSpec,
    Scheme,
    SolverConfig,
    TdScheme,
    bcd_solve,
)

RNG_NAME = "numpy-default_rng(PCG64)"


class ConfigError(ValueError):
    """A config field is missing, mistyped, or out of range."""


def _at(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key

def _need(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"{_at(path, key)} is required")
    return d[key]

def _num(d: dict, key: str, path: str, default=None, positive=False):
    if key not in d:
        if default is None:
            raise ConfigError(f"{_at(path, key)} is required")
        return float(default)
    v = d[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
        raise ConfigError(f"{_at(path, key)} must be a finite number, got {v!r}")
    if positive and v <= 0:
        raise ConfigError(f"{_at(path, key)} must be positive, got {v}")
    return float(v)

def _int(d: dict, key: str, path: str, default=None, minimum=1):
    if key not in d:
        if default is None:
            raise ConfigError(f"{_at(path, key)} is required")
        return default
    v = d[key]
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(f"{_at(path, key)} must be an integer, got {v!r}")
    if v < minimum:
        raise ConfigError(f"{_at(path, key)} must be >= {minimum}, got {v}")
    return v

def _db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def _parse_point(v, path: str, default_z: float) -> Position3:
    if not isinstance(v, (list, tuple)) or len(v) not in (2, 3):
        raise ConfigError(f"{path} must be [x, y] or [x, y, z], got {v!r}")
    vals = [float(s) for s in v]
    if len(vals) == 2:
        vals.append(default_z)
    return Position3(*vals)


@dataclass(frozen=True)
class RunConfig:
    """Parsed, validated run description. `raw` is the canonical dict the
    record stores; sensors are already materialized (generator expanded)."""

    raw: dict
    seed: int
    repetitions: int
    scenario: Scenario
    scheme: Scheme
    error_budget: float
    max_segment_override: float | None
    solver: SolverConfig

    @staticmethod
    def from_dict(d: dict, seed_override: int | None = None) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"config root must be an object, got {type(d).__name__}")
        seed = seed_override if seed_override is not None else _int(d, "seed", "", default=0, minimum=0)
        repetitions = _int(d, "repetitions", "", default=1)

        sc = _need(d, "scenario", "")
        if not isinstance(sc, dict):
            raise ConfigError("scenario must be an object")
        h_min = _num(sc, "h_min_m", "scenario", positive=True)
        v_max = _num(sc, "v_max_mps", "scenario", positive=True)
        period = _num(sc, "period_s", "scenario", positive=True)
        beta0 = _db_to_linear(_num(sc, "beta0_db", "scenario"))
        noise = _db_to_linear(_num(sc, "noise_dbw", "scenario"))
        eps = _num(sc, "epsilon_robust", "scenario", default=0.0)
        if eps < 0:
            raise ConfigError("scenario.epsilon_robust must be nonnegative")

        if ("sensors" in sc) == ("generator" in sc):
            raise ConfigError("scenario needs exactly one of 'sensors' or 'generator'")
        if "sensors" in sc:
            raw_sensors = sc["sensors"]
            if not isinstance(raw_sensors, list) or not raw_sensors:
                raise ConfigError("scenario.sensors must be a nonempty list of positions")
            sensors = tuple(
                _parse_point(p, f"scenario.sensors[{i}]", 0.0) for i, p in enumerate(raw_sensors)
            )
        else:
            gen = sc["generator"]
            if not isinstance(gen, dict):
                raise ConfigError("scenario.generator must be an object")
            count = _int(gen, "count", "scenario.generator")
            side = _num(gen, "side_m", "scenario.generator", positive=True)
            rng = np.random.default_rng(seed)
            pts = rng.uniform(-side / 2.0, side / 2.0, size=(count, 2))
            sensors = tuple(Position3(float(x), float(y), 0.0) for x, y in pts)

        tx = sc.get("tx_power_w", None)
        if tx is None:
            raise ConfigError("scenario.tx_power_w is required")
        if isinstance(tx, (int, float)) and not isinstance(tx, bool):
            powers = tuple(float(tx) for _ in sensors)
        elif isinstance(tx, list) and len(tx) == len(sensors):
            powers = tuple(float(p) for p in tx)
        else:
            raise ConfigError(
                "scenario.tx_power_w must be a number or a list with one entry per sensor"
            )
        if any(p <= 0 for p in powers):
            raise ConfigError("scenario.tx_power_w entries must be positive")

        q_start = _parse_point(sc.get("q_start", [0.0, 0.0]), "scenario.q_start", h_min)
        q_end = _parse_point(sc.get("q_end", [q_start.x, q_start.y, q_start.z]), "scenario.q_end", h_min)

        acc = d.get("accuracy", {})
        if not isinstance(acc, dict):
            raise ConfigError("accuracy must be an object")
        budget = _num(acc, "error_budget", "accuracy", default=0.05, positive=True)
        override = None
        if "max_segment_m" in acc:
            override = _num(acc, "max_segment_m", "accuracy", positive=True)

        sch = _need(d, "scheme", "")
        if not isinstance(sch, dict):
            raise ConfigError("scheme must be an object")
        kind = _need(sch, "type", "scheme")
        if kind == "td":
            slots = _int(sch, "num_slots", "scheme", default=0, minimum=0)
            scheme: Scheme = TdScheme(num_slots=slots if slots else 1)  # placeholder, resolved later
        elif kind == "cpd":
            scheme = CpdScheme(num_segments=_int(sch, "num_segments", "scheme"))
        elif kind == "fpd":
            scheme = FpdScheme(
                num_long=_int(sch, "num_long", "scheme"),
                short_per_long=_int(sch, "short_per_long", "scheme", default=1),
            )
        elif kind == "fpd-pc":
            try:
                scheme = FpdPcScheme(
                    num_long=_int(sch, "num_long", "scheme"),
                    short_per_long=_int(sch, "short_per_long", "scheme", default=1),
                    keep=_int(sch, "keep", "scheme"),
                    basis=sch.get("basis", "fourier"),
                    selection=sch.get("selection", "lfb"),
                )
            except ValueError as e:
                raise ConfigError(f"scheme: {e}") from e
        else:
            raise ConfigError(f"scheme.type must be td|cpd|fpd|fpd-pc, got {kind!r}")

        sv = d.get("solver", {})
        if not isinstance(sv, dict):
            raise ConfigError("solver must be an object")
        try:
            solver = SolverConfig(
                bcd_max_iters=_int(sv, "bcd_max_iters", "solver", default=50),
                bcd_rel_tol=_num(sv, "bcd_rel_tol", "solver", default=1e-4),
                sca_max_iters=_int(sv, "sca_max_iters", "solver", default=20),
                sca_rel_tol=_num(sv, "sca_rel_tol", "solver", default=1e-4),
                conic_kkt_tol=_num(sv, "conic_kkt_tol", "solver", default=1e-8),
                seed=seed,
                block_order=tuple(sv.get("block_order", ("schedule", "durations", "waypoints"))),
            )
        except ValueError as e:
            raise ConfigError(f"solver: {e}") from e

        try:
            scenario = Scenario(
                sensors=sensors,
                tx_powers=powers,
                beta0=beta0,
                noise_power=noise,
                h_min=h_min,
                v_max=v_max,
                period=period,
                q_start=q_start,
                q_end=q_end,
                epsilon_robust=eps,
            )
        except ValueError as e:
            raise ConfigError(f"scenario: {e}") from e

        canonical = dict(d)
        canonical["seed"] = seed
        canonical["scenario"] = dict(sc)
        canonical["scenario"]["sensors"] = [[w.x, w.y, w.z] for w in sensors]
        canonical["scenario"].pop("generator", None)
        return RunConfig(
            raw=canonical,
            seed=seed,
            repetitions=repetitions,
            scenario=scenario,
            scheme=scheme,
            error_budget=budget,
            max_segment_override=override,
            solver=solver,
        )

    @staticmethod
    def from_file(path: str | Path, seed_override: int | None = None) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from e
        return RunConfig.from_dict(d, seed_override)


def resolve_spec(config: RunConfig) -> tuple[ProblemSpec, dict]:
    """Build the solvable instance and the derived-quantities block.

    The accuracy chain runs first; an explicit accuracy.max_segment_m only
    ever tightens the derived cap. A td scheme without num_slots gets the
    coarsest grid admitted by the cap.
    """
    scen = config.scenario
    bounds = derive_segment_bounds(scen, config.error_budget)
    used = bounds.max_segment_m
    if config.max_segment_override is not None:
        used = min(used, config.max_segment_override)

    scheme = config.scheme
    raw_scheme = config.raw.get("scheme", {})
    if isinstance(scheme, TdScheme) and not raw_scheme.get("num_slots"):
        grid = make_td_grid(scen, used)
        scheme = TdScheme(num_slots=grid.num_slots)

    spec = ProblemSpec(scenario=scen, scheme=scheme, max_segment=used, config=config.solver)

    num_long, per_long, fixed = _scheme_counts(scheme)
    derived = {
        "peak_radius_m": bounds.peak_radius_m,
        "snr_scale": bounds.snr_scale,
        "gradient_bound_per_m": bounds.gradient_bound,
        "delta_derived_m": bounds.max_segment_m,
        "delta_used_m": used,
        "min_segments_span": min_segment_count(scen.q_start, scen.q_end, used),
        "num_long": num_long,
        "short_per_long": per_long,
        "num_short_segments": num_long * per_long,
        "durations_fixed": fixed,
        "design_variables": _design_vars(scheme),
    }
    if isinstance(scheme, TdScheme):
        derived["num_slots"] = scheme.num_slots
        derived["slot_s"] = scen.period / scheme.num_slots
    if isinstance(scheme, FpdPcScheme):
        derived["compression_ratio"] = scheme.keep / (scheme.num_long + 1)
    return spec, derived


def _scheme_counts(scheme: Scheme) -> tuple[int, int, bool]:
    if isinstance(scheme, TdScheme):
        return scheme.num_slots, 1, True
    if isinstance(scheme, CpdScheme):
        return scheme.num_segments, 1, False
    return scheme.num_long, scheme.short_per_long, False


def _design_vars(scheme: Scheme) -> int:
    if isinstance(scheme, FpdPcScheme):
        return 2 * scheme.keep
    num_long, _, _ = _scheme_counts(scheme)
    return 2 * (num_long + 1)


@dataclass
class RunRecord:
    """Everything one run produced, serializable to a single JSON object."""

    run_id: str
    config: dict
    derived: dict
    objective: float
    rates: list[float]
    iterations: list[float]
    status: str
    wall_ms: float
    block_seconds: dict[str, float]
    block_solves: dict[str, int]
    trajectory: list[list[float]]
    schedule: list[list[float]]
    rng: str = RNG_NAME
    version: str = __version__
    timestamp: str = ""
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "config": self.config,
            "derived": self.derived,
            "objective": self.objective,
            "rates": self.rates,
            "iterations": self.iterations,
            "status": self.status,
            "wall_ms": self.wall_ms,
            "block_seconds": self.block_seconds,
            "block_solves": self.block_solves,
            "trajectory": self.trajectory,
            "schedule": self.schedule,
            "rng": self.rng,
            "version": self.version,
            "timestamp": self.timestamp,
            "error": self.error,
        }

    @staticmethod
    def from_dict(d: dict) -> "RunRecord":
        return RunRecord(**d)


def _run_id(config_dict: dict) -> str:
    blob = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def run(config: RunConfig) -> RunRecord:
    """Solve one config; repetitions re-solve and must agree exactly."""
    spec, derived = resolve_spec(config)
    solutions = []
    walls = []
    for _ in range(max(1, config.repetitions)):
        t0 = time.perf_counter()
        sol = bcd_solve(spec)
        walls.append((time.perf_counter() - t0) * 1000.0)
        solutions.append(sol)
    first = solutions[0]
    for other in solutions[1:]:
        if other.objective != first.objective:
            raise RuntimeError(
                f"nondeterministic solve: objectives {first.objective!r} vs {other.objective!r}"
            )
    traj_rows = [[0, first.trajectory.waypoints[0].x, first.trajectory.waypoints[0].y,
                  first.trajectory.waypoints[0].z, 0.0]]
    for i, (q, t) in enumerate(zip(first.trajectory.waypoints[1:], first.trajectory.durations)):
        traj_rows.append([i + 1, q.x, q.y, q.z, t])
    sched_rows = []
    for n in range(first.schedule.num_segments):
        for s in range(first.schedule.num_sensors):
            sched_rows.append([n, s, float(first.schedule.alpha[s, n])])
    return RunRecord(
        run_id=_run_id(config.raw),
        config=config.raw,
        derived=derived,
        objective=first.objective,
        rates=[float(r) for r in first.rates],
        iterations=[float(v) for v in first.iterations],
        status=first.status,
        wall_ms=float(np.median(walls)),
        block_seconds=dict(first.block_seconds),
        block_solves=dict(first.block_solves),
        trajectory=traj_rows,
        schedule=sched_rows,
        timestamp=datetime.now(timezone.utc).isoformat(),
    )


AXES = ("n_fpd", "j", "k", "scheme")


def apply_axis(raw: dict, axis: str, value) -> dict:
    """New raw config dict with one sweep-axis value applied."""
    d = json.loads(json.dumps(raw))
    sch = d.get("scheme", {})
    kind = sch.get("type")
    if axis == "n_fpd":
        total = int(value)
        if kind in ("fpd", "fpd-pc"):
            per = int(sch.get("short_per_long", 1))
            if total % per != 0:
                raise ConfigError(f"n_fpd={total} not divisible by short_per_long={per}")
            sch["num_long"] = total // per
        elif kind == "cpd":
            sch["num_segments"] = total
        elif kind == "td":
            sch["num_slots"] = total
        else:
            raise ConfigError(f"axis n_fpd cannot apply to scheme {kind!r}")
    elif axis == "j":
        if kind not in ("fpd", "fpd-pc"):
            raise ConfigError("axis j applies to fpd/fpd-pc schemes only")
        per_old = int(sch.get("short_per_long", 1))
        total = int(sch["num_long"]) * per_old
        per = int(value)
        if total % per != 0:
            raise ConfigError(f"total short segments {total} not divisible by j={per}")
        sch["short_per_long"] = per
        sch["num_long"] = total // per
    elif axis == "k":
        if kind != "fpd-pc":
            raise ConfigError("axis k applies to fpd-pc schemes only")
        sch["keep"] = int(value)
    elif axis == "scheme":
        d["scheme"] = _scheme_block_for(str(value), sch)
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {AXES}")
    d["scheme"] = sch if axis != "scheme" else d["scheme"]
    return d


def _scheme_block_for(kind: str, base: dict) -> dict:
    """Translate a scheme block to another type at equal short-segment count."""
    base_kind = base.get("type")
    if base_kind in ("fpd", "fpd-pc"):
        total = int(base["num_long"]) * int(base.get("short_per_long", 1))
    elif base_kind == "cpd":
        total = int(base["num_segments"])
    elif base_kind == "td" and base.get("num_slots"):
        total = int(base["num_slots"])
    else:
        raise ConfigError("scheme axis needs a base scheme with explicit counts")
    if kind == "td":
        return {"type": "td"}
    if kind == "cpd":
        return {"type": "cpd", "num_segments": total}
    if kind == "fpd":
        per = int(base.get("short_per_long", 2))
        if total % per != 0:
            raise ConfigError(f"{total} short segments not divisible by short_per_long={per}")
        return {"type": "fpd", "num_long": total // per, "short_per_long": per}
    if kind == "fpd-pc":
        per = int(base.get("short_per_long", 2))
        if total % per != 0:
            raise ConfigError(f"{total} short segments not divisible by short_per_long={per}")
        block = {
            "type": "fpd-pc",
            "num_long": total // per,
            "short_per_long": per,
            "keep": int(base.get("keep", 6)),
            "basis": base.get("basis", "fourier"),
            "selection": base.get("selection", "lfb"),
        }
        return block
    raise ConfigError(f"unknown scheme {kind!r} in sweep values")


def _run_point(point: dict) -> RunRecord:
    cfg = RunConfig.from_dict(point)
    return run(cfg)


def _failed_record(point: dict, exc: Exception) -> RunRecord:
    return RunRecord(
        run_id=_run_id(point),
        config=point,
        derived={},
        objective=float("nan"),
        rates=[],
        iterations=[],
        status="failed",
        wall_ms=float("nan"),
        block_seconds={},
        block_solves={},
        trajectory=[],
        schedule=[],
        timestamp=datetime.now(timezone.utc).isoformat(),
        error=f"{type(exc).__name__}: {exc}",
    )


def sweep(config: RunConfig, axis: str, values: list, parallel: int = 1) -> list[RunRecord]:
    """Run one point per axis value; rows stay in axis order and failures
    come back as flagged records instead of disappearing."""
    if axis not in AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {AXES}")
    if not values:
        raise ConfigError("sweep needs at least one axis value")
    points = [apply_axis(config.raw, axis, v) for v in values]
    for i, p in enumerate(points):
        p["sweep"] = {"axis": axis, "value": values[i], "index": i,
                      "point_seed_stream": [config.seed, i]}
    records: list[RunRecord] = []
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            futures = [pool.submit(_run_point, p) for p in points]
            for p, fut in zip(points, futures):
                try:
                    records.append(fut.result())
                except Exception as exc:
                    records.append(_failed_record(p, exc))
    else:
        for p in points:
            try:
                records.append(_run_point(p))
            except Exception as exc:
                records.append(_failed_record(p, exc))
    return records


_SUMMARY_COLS = (
    "run_id",
    "scheme",
    "num_slots",
    "num_segments",
    "num_long",
    "short_per_long",
    "keep",
    "delta_max_m",
    "objective_bps_hz",
    "min_sensor",
    "iterations",
    "wall_ms",
    "status",
)


def summary_row(record: RunRecord) -> dict:
    sch = record.config.get("scheme", {})
    rates = record.rates
    return {
        "run_id": record.run_id,
        "scheme": sch.get("type", ""),
        "num_slots": sch.get("num_slots", record.derived.get("num_long", "") if sch.get("type") == "td" else ""),
        "num_segments": sch.get("num_segments", ""),
        "num_long": sch.get("num_long", ""),
        "short_per_long": sch.get("short_per_long", ""),
        "keep": sch.get("keep", ""),
        "delta_max_m": record.derived.get("delta_used_m", ""),
        "objective_bps_hz": record.objective,
        "min_sensor": int(np.argmin(rates)) if rates else "",
        "iterations": max(0, len(record.iterations) - 1),
        "wall_ms": record.wall_ms,
        "status": record.status,
    }


def emit(records: list[RunRecord], fmt: str, out_dir: str | Path) -> list[Path]:
    """Write summary plus per-run trajectory and schedule files; returns paths."""
    if not records:
        raise ValueError("nothing to emit: empty record list")
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"format must be csv or jsonl, got {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []

    if fmt == "jsonl":
        p = out / "results.jsonl"
        with p.open("w") as f:
            for r in records:
                f.write(json.dumps(r.to_dict()) + "\n")
        paths.append(p)
    else:
        p = out / "results.csv"
        with p.open("w") as f:
            f.write(",".join(_SUMMARY_COLS) + "\n")
            for r in records:
                row = summary_row(r)
                f.write(",".join(str(row[c]) for c in _SUMMARY_COLS) + "\n")
        paths.append(p)

    for r in records:
        if not r.trajectory:
            continue
        tp = out / f"traj_{r.run_id}.csv"
        with tp.open("w") as f:
            f.write("index,x_m,y_m,z_m,duration_s\n")
            for row in r.trajectory:
                f.write(f"{int(row[0])},{row[1]!r},{row[2]!r},{row[3]!r},{row[4]!r}\n")
        paths.append(tp)
        sp_ = out / f"schedule_{r.run_id}.csv"
        with sp_.open("w") as f:
            f.write("segment,sensor,alpha\n")
            for row in r.schedule:
                f.write(f"{int(row[0])},{int(row[1])},{row[2]!r}\n")
        paths.append(sp_)
    return paths


def load_records(path: str | Path) -> list[RunRecord]:
    """Read back a results.jsonl file (lossless inverse of emit)."""
    records = []
    with Path(path).open() as f:
        for line in f:
            if line.strip():
                records.append(RunRecord.from_dict(json.loads(line)))
    return records
