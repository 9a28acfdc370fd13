"""Max-min data harvesting: block-coordinate descent with convex inner steps.

One aerial collector flies a period-T piecewise-linear trajectory over S
ground sensors and must maximize the smallest per-sensor harvested rate.
Blocks: TDMA schedule (LP), segment durations (LP), waypoints or compressed
path coefficients (successive convex approximation, one second-order-cone
program per step). Every block accepts its candidate only when the true
objective does not decrease, so the iteration log is monotone by
construction.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_triangular
from scipy.optimize import linprog

from .model import (
    ABS_TOL,
    LN2,
    REL_TOL,
    PiecewiseTrajectory,
    Position3,
    Scenario,
    Schedule,
    validate_trajectory,
)
from .discretize import finite_sum_rates
from .basis import fourier_basis, shifted_sine_basis, select_rows, SELECTIONS
from .conic import (
    ClarabelBackend,
    ConicProgram,
    ConicSolveError,
    SecondOrderCone,
    quadratic_budget_cone,
)

MIN_DURATION_S = 1e-6


class InitializationError(RuntimeError):
    """No feasible starting point exists for the requested scheme."""


class InfeasibleDurationsError(RuntimeError):
    """Segment lengths cannot be flown within the period at v_max."""


@dataclass(frozen=True)
class TdScheme:
    """Uniform time grid: num_slots equal slots, durations not optimized."""

    num_slots: int

    def __post_init__(self) -> None:
        if self.num_slots < 1:
            raise ValueError("num_slots must be >= 1")


@dataclass(frozen=True)
class CpdScheme:
    """Free-duration path segments, every waypoint designable."""

    num_segments: int

    def __post_init__(self) -> None:
        if self.num_segments < 1:
            raise ValueError("num_segments must be >= 1")


@dataclass(frozen=True)
class FpdScheme:
    """Sparse designable waypoints; each long segment flown as short_per_long
    equal short segments with interpolated interior waypoints."""

    num_long: int
    short_per_long: int

    def __post_init__(self) -> None:
        if self.num_long < 1 or self.short_per_long < 1:
            raise ValueError("num_long and short_per_long must be >= 1")


@dataclass(frozen=True)
class FpdPcScheme:
    """FPD with the designable waypoints confined to keep basis paths."""

    num_long: int
    short_per_long: int
    keep: int
    basis: str = "fourier"
    selection: str = "lfb"

    def __post_init__(self) -> None:
        if self.num_long < 1 or self.short_per_long < 1:
            raise ValueError("num_long and short_per_long must be >= 1")
        if not 1 <= self.keep <= self.num_long + 1:
            raise ValueError(f"keep must be in [1, {self.num_long + 1}], got {self.keep}")
        if self.basis not in ("fourier", "shifted-sine"):
            raise ValueError(f"unknown basis {self.basis!r}")
        if self.selection not in SELECTIONS:
            raise ValueError(f"unknown selection {self.selection!r}")
        if self.basis == "shifted-sine" and self.num_long % 2 != 0:
            raise ValueError("shifted-sine basis needs an even num_long")


Scheme = TdScheme | CpdScheme | FpdScheme | FpdPcScheme

_BLOCKS = ("schedule", "durations", "waypoints")


@dataclass(frozen=True)
class SolverConfig:
    bcd_max_iters: int = 50
    bcd_rel_tol: float = 1e-4
    sca_max_iters: int = 20
    sca_rel_tol: float = 1e-4
    conic_kkt_tol: float = 1e-8
    seed: int = 0
    block_order: tuple[str, ...] = _BLOCKS

    def __post_init__(self) -> None:
        object.__setattr__(self, "block_order", tuple(self.block_order))
        if self.bcd_max_iters < 1 or self.sca_max_iters < 1:
            raise ValueError("iteration budgets must be >= 1")
        if self.bcd_rel_tol < 0 or self.sca_rel_tol < 0:
            raise ValueError("tolerances must be nonnegative")
        if not 0 < self.conic_kkt_tol <= 1e-2:
            raise ValueError("conic_kkt_tol must be in (0, 1e-2]")
        if not self.block_order or len(set(self.block_order)) != len(self.block_order):
            raise ValueError("block_order must be nonempty without repeats")
        for b in self.block_order:
            if b not in _BLOCKS:
                raise ValueError(f"unknown block {b!r}; expected names from {_BLOCKS}")


@dataclass(frozen=True)
class ProblemSpec:
    """One solvable instance: scenario, scheme, and the segment-length cap."""

    scenario: Scenario
    scheme: Scheme
    max_segment: float
    config: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self) -> None:
        if not math.isfinite(self.max_segment) or self.max_segment <= 0:
            raise ValueError("max_segment must be positive and finite")
        scen = self.scenario
        for name, q in (("q_start", scen.q_start), ("q_end", scen.q_end)):
            if abs(q.z - scen.h_min) > REL_TOL * scen.h_min + ABS_TOL:
                raise ValueError(
                    f"{name} altitude {q.z} must equal h_min {scen.h_min} "
                    "(fixed-altitude design)"
                )
        num_long, per_long, fixed = _structure(self.scheme)
        if fixed:
            slot = scen.period / num_long
            if slot * scen.v_max > self.max_segment * (1.0 + REL_TOL) + ABS_TOL:
                raise ValueError(
                    f"{num_long} slots give {slot * scen.v_max:.4f} m per slot at v_max, "
                    f"over the {self.max_segment:.4f} m segment cap; need at least "
                    f"{math.ceil(scen.period * scen.v_max / self.max_segment - 1e-9)} slots"
                )
        span = scen.q_start.distance_to(scen.q_end)
        reach = num_long * per_long * self.max_segment
        if span > reach * (1.0 + REL_TOL) + ABS_TOL:
            raise ValueError(
                f"{num_long} long segments of at most {per_long * self.max_segment:.4f} m "
                f"cannot span the {span:.4f} m between the endpoints"
            )


@dataclass
class SolverState:
    """Mutable iterate: designable waypoints, durations, schedule, coefficients."""

    desig_xy: np.ndarray
    durations: np.ndarray
    alpha: np.ndarray
    coeffs: np.ndarray | None = None


@dataclass
class Solution:
    trajectory: PiecewiseTrajectory
    designable: tuple[Position3, ...]
    coeffs: np.ndarray | None
    schedule: Schedule
    rates: np.ndarray
    objective: float
    iterations: list[float]
    wall_time_s: float
    status: str
    block_seconds: dict[str, float]
    block_solves: dict[str, int]


def _structure(scheme: Scheme) -> tuple[int, int, bool]:
    """(long-segment count, short segments per long, durations fixed?)."""
    if isinstance(scheme, TdScheme):
        return scheme.num_slots, 1, True
    if isinstance(scheme, CpdScheme):
        return scheme.num_segments, 1, False
    if isinstance(scheme, FpdScheme):
        return scheme.num_long, scheme.short_per_long, False
    if isinstance(scheme, FpdPcScheme):
        return scheme.num_long, scheme.short_per_long, False
    raise TypeError(f"unknown scheme {scheme!r}")


def _scheme_rows(scheme: FpdPcScheme) -> np.ndarray:
    """Selected basis rows (keep x num_long+1) for a compressed scheme."""
    make = fourier_basis if scheme.basis == "fourier" else shifted_sine_basis
    basis = make(scheme.num_long)
    idx = select_rows(scheme.num_long, scheme.keep, scheme.selection)
    return basis.entries[list(idx)]


def _short_points(desig_xy: np.ndarray, per_long: int) -> np.ndarray:
    """All short-segment endpoints including the start, shape (L*J+1, 2)."""
    if per_long == 1:
        return desig_xy
    frac = np.arange(1, per_long + 1) / per_long
    a = desig_xy[:-1]
    b = desig_xy[1:]
    interior = a[:, None, :] + frac[None, :, None] * (b - a)[:, None, :]
    return np.concatenate([desig_xy[:1], interior.reshape(-1, 2)], axis=0)


def _expand(spec: ProblemSpec, desig_xy: np.ndarray, durations: np.ndarray) -> PiecewiseTrajectory:
    """Dense trajectory at the flight altitude with exactly pinned endpoints.

    Conic steps satisfy speed caps only to solver tolerance, so schemes with
    movable durations get a duration repair here; the repair is a no-op on
    points that already satisfy the caps exactly.
    """
    scen = spec.scenario
    _, per_long, fixed = _structure(spec.scheme)
    desig = np.asarray(desig_xy, dtype=float).copy()
    desig[0] = (scen.q_start.x, scen.q_start.y)
    desig[-1] = (scen.q_end.x, scen.q_end.y)
    pts = _short_points(desig, per_long)
    durs = np.asarray(durations, dtype=float)
    if not fixed:
        lengths = np.linalg.norm(np.diff(desig, axis=0), axis=1)
        durs = _repair_durations(durs, lengths, scen.v_max, scen.period)
    short_durs = np.repeat(durs / per_long, per_long)
    waypoints = tuple(Position3(float(x), float(y), scen.h_min) for x, y in pts)
    return PiecewiseTrajectory(waypoints, tuple(short_durs))


def _rate_matrix(traj: PiecewiseTrajectory, scen: Scenario) -> np.ndarray:
    """Spectral efficiency of each sensor at each segment endpoint, (S, N)."""
    q = traj.waypoint_array[1:]
    w = scen.sensor_array
    d2 = ((q[None, :, :] - w[:, None, :]) ** 2).sum(axis=2)
    return np.log2(1.0 + scen.snr_scales[:, None] / d2)


def evaluate(
    spec: ProblemSpec, state: SolverState
) -> tuple[float, np.ndarray, PiecewiseTrajectory, Schedule]:
    """(objective, per-sensor rates, expanded trajectory, schedule) of a state."""
    traj = _expand(spec, state.desig_xy, state.durations)
    schedule = Schedule(state.alpha)
    rates = finite_sum_rates(traj, spec.scenario, schedule)
    return float(rates.min()), rates, traj, schedule


def initialize(spec: ProblemSpec, radius_factor: float = 1.0) -> SolverState:
    """Feasible starting point: closed tours start on a circle toward the
    sensor centroid, open tours on the straight connecting line; uniform
    durations and a uniform schedule. Compressed schemes fit coefficients to
    that geometry under exact endpoint constraints.

    radius_factor in (0, 1] shrinks the tour circle; shrinking keeps every
    feasibility margin, so factors give cheap deterministic extra starts.
    """
    if not 0.0 < radius_factor <= 1.0:
        raise ValueError(f"radius_factor must be in (0, 1], got {radius_factor}")
    scen = spec.scenario
    num_long, per_long, _ = _structure(spec.scheme)
    start = np.array([scen.q_start.x, scen.q_start.y])
    end = np.array([scen.q_end.x, scen.q_end.y])
    span = float(np.linalg.norm(end - start))

    if span <= ABS_TOL:
        sensors_xy = scen.sensor_array[:, :2]
        centroid = sensors_xy.mean(axis=0)
        r_sens = float(np.linalg.norm(sensors_xy - centroid, axis=1).max())
        r_time = scen.v_max * scen.period / (2.0 * math.pi + 0.1)
        if num_long >= 2:
            r_chord = 0.99 * per_long * spec.max_segment / (2.0 * math.sin(math.pi / num_long))
        else:
            r_chord = 0.0
        radius = radius_factor * min(r_time, r_sens, r_chord)
        if radius <= ABS_TOL:
            desig = np.tile(start, (num_long + 1, 1))
        else:
            heading = centroid - start
            norm = np.linalg.norm(heading)
            direction = heading / norm if norm > ABS_TOL else np.array([1.0, 0.0])
            center = start + radius * direction
            theta0 = math.atan2(start[1] - center[1], start[0] - center[0])
            angles = theta0 + 2.0 * math.pi * np.arange(num_long + 1) / num_long
            desig = center[None, :] + radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
            desig[0] = start
            desig[-1] = start
    else:
        steps = np.linspace(0.0, 1.0, num_long + 1)[:, None]
        desig = start[None, :] + steps * (end - start)[None, :]

    durations = np.full(num_long, scen.period / num_long)
    alpha = np.full((scen.num_sensors, num_long * per_long), 1.0 / scen.num_sensors)

    coeffs = None
    if isinstance(spec.scheme, FpdPcScheme):
        coeffs = _fit_coeffs(spec, desig, durations)
        desig = (coeffs @ _scheme_rows(spec.scheme)).T
    return SolverState(desig_xy=desig, durations=durations, alpha=alpha, coeffs=coeffs)


def _caps(spec: ProblemSpec, durations: np.ndarray) -> np.ndarray:
    _, per_long, _ = _structure(spec.scheme)
    return np.minimum(per_long * spec.max_segment, durations * spec.scenario.v_max)


def _caps_ok(spec: ProblemSpec, desig_xy: np.ndarray, durations: np.ndarray) -> bool:
    lengths = np.linalg.norm(np.diff(desig_xy, axis=0), axis=1)
    caps = _caps(spec, durations)
    return bool(np.all(lengths <= caps * (1.0 + REL_TOL) + ABS_TOL))


def _constrained_fit(rows: np.ndarray, target: np.ndarray, endpoints: np.ndarray) -> np.ndarray:
    """Least-squares fit of one coordinate onto basis rows with the first and
    last reconstructed waypoints pinned to the given endpoint values."""
    from scipy.linalg import null_space

    num_cols = rows.shape[1]
    b_mat = rows[:, [0, num_cols - 1]].T
    part = np.linalg.lstsq(b_mat, endpoints, rcond=None)[0]
    pin_err = np.linalg.norm(b_mat @ part - endpoints)
    if pin_err > 1e-6 * max(1.0, float(np.abs(endpoints).max())):
        raise InitializationError(
            "the selected basis rows cannot pin the trajectory endpoints "
            f"(residual {pin_err:.3e}); pick a selection whose rows are nonzero "
            "at the boundary columns or move the endpoints to the origin"
        )
    null = null_space(b_mat)
    if null.size == 0:
        return part
    design = rows.T @ null
    z = np.linalg.lstsq(design, target - rows.T @ part, rcond=None)[0]
    coeff = part + null @ z
    residual = target - rows.T @ coeff
    z = np.linalg.lstsq(design, residual, rcond=None)[0]
    return coeff + null @ z


def _fit_coeffs(spec: ProblemSpec, desig: np.ndarray, durations: np.ndarray) -> np.ndarray:
    """Coefficients whose reconstruction stays feasible, preferring the fit
    of the geometric initial path and blending back toward the straight
    (or hovering) connector when segment caps are violated."""
    scheme = spec.scheme
    rows = _scheme_rows(scheme)
    scen = spec.scenario
    start = np.array([scen.q_start.x, scen.q_start.y])
    end = np.array([scen.q_end.x, scen.q_end.y])
    num_long = scheme.num_long

    def fit(points: np.ndarray) -> np.ndarray:
        return np.stack(
            [
                _constrained_fit(rows, points[:, d], np.array([start[d], end[d]]))
                for d in range(2)
            ]
        )

    target = fit(desig)
    if _caps_ok(spec, (target @ rows).T, durations):
        return target

    steps = np.linspace(0.0, 1.0, num_long + 1)[:, None]
    connector = start[None, :] + steps * (end - start)[None, :]
    anchor = fit(connector)
    if not _caps_ok(spec, (anchor @ rows).T, durations):
        raise InitializationError(
            "even the straight connector violates segment caps after projection "
            "onto the selected basis rows; the compressed family is too small "
            "for this scheme"
        )
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        cand = anchor + mid * (target - anchor)
        if _caps_ok(spec, (cand @ rows).T, durations):
            lo = mid
        else:
            hi = mid
    return anchor + lo * (target - anchor)


def solve_schedule(
    rates: np.ndarray, durations: np.ndarray, period: float, epsilon_robust: float = 0.0
) -> tuple[Schedule, float]:
    """Best relaxed-TDMA allocation for fixed geometry.

    Maximizes min_s (1/T) sum_n alpha[s,n] * t_n * rates[s,n] over
    alpha in [0,1]^{SxN} with column sums at most 1. Returns the schedule
    and the achieved (untightened) min rate.
    """
    u = np.asarray(rates, dtype=float)
    t = np.asarray(durations, dtype=float)
    if u.ndim != 2 or t.shape != (u.shape[1],):
        raise ValueError(f"rates {u.shape} and durations {t.shape} do not align")
    num_s, num_n = u.shape
    coeff = u * t[None, :] / (period * (1.0 + epsilon_robust))

    num_var = num_s * num_n + 1
    rows, cols, vals = [], [], []
    for n in range(num_n):
        for s in range(num_s):
            rows.append(n)
            cols.append(s * num_n + n)
            vals.append(1.0)
    for s in range(num_s):
        rows.append(num_n + s)
        cols.append(num_var - 1)
        vals.append(1.0)
        for n in range(num_n):
            rows.append(num_n + s)
            cols.append(s * num_n + n)
            vals.append(-coeff[s, n])
    a_ub = sp.coo_matrix((vals, (rows, cols)), shape=(num_n + num_s, num_var))
    b_ub = np.concatenate([np.ones(num_n), np.zeros(num_s)])
    c = np.zeros(num_var)
    c[-1] = -1.0
    bounds = [(0.0, 1.0)] * (num_s * num_n) + [(0.0, None)]
    res = linprog(c, A_ub=a_ub.tocsr(), b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"schedule LP failed: {res.message}")
    alpha = res.x[:-1].reshape(num_s, num_n)
    schedule = Schedule(alpha)
    achieved = float((schedule.alpha * t[None, :] * u).sum(axis=1).min() / period)
    return schedule, achieved


def _repair_durations(
    t: np.ndarray, lengths: np.ndarray, v_max: float, period: float
) -> np.ndarray:
    """Clamp LP output so speed caps and the period hold exactly."""
    lb = np.maximum(lengths / v_max, MIN_DURATION_S)
    if lb.sum() > period * (1.0 + REL_TOL):
        raise InfeasibleDurationsError(
            f"minimum flight times sum to {lb.sum():.6f} s over the period {period} s"
        )
    t = np.maximum(np.asarray(t, dtype=float), lb)
    excess = t.sum() - period
    if excess > 0.0:
        slack = t - lb
        total = slack.sum()
        if total <= 0.0:
            raise InfeasibleDurationsError("no slack left to absorb the period overrun")
        t = t - slack * (excess / total)
    return t


def solve_durations(
    spec: ProblemSpec, desig_xy: np.ndarray, alpha: np.ndarray
) -> tuple[np.ndarray, float]:
    """Best long-segment durations for fixed waypoints and schedule.

    Maximizes min_s sum_l c[s,l] * t_l subject to sum t <= T and
    t_l >= length_l / v_max (so speed caps stay satisfiable), where c
    aggregates the schedule-weighted rates of the short segments inside
    each long segment. Not applicable to fixed-grid schemes.
    """
    scen = spec.scenario
    num_long, per_long, fixed = _structure(spec.scheme)
    if fixed:
        raise ValueError("durations are fixed for a uniform time grid")
    traj = _expand(spec, desig_xy, np.full(num_long, scen.period / num_long))
    u = _rate_matrix(traj, scen)
    phi = 1.0 / (scen.period * (1.0 + scen.epsilon_robust) * per_long)
    coeff = (np.asarray(alpha) * u).reshape(scen.num_sensors, num_long, per_long).sum(axis=2) * phi

    lengths = np.linalg.norm(np.diff(desig_xy, axis=0), axis=1)
    lb = np.maximum(lengths / scen.v_max, MIN_DURATION_S)
    if lb.sum() > scen.period * (1.0 + REL_TOL):
        raise InfeasibleDurationsError(
            f"minimum flight times sum to {lb.sum():.6f} s over the period {scen.period} s"
        )

    num_var = num_long + 1
    rows, cols, vals = [], [], []
    for s in range(scen.num_sensors):
        rows.append(s)
        cols.append(num_long)
        vals.append(1.0)
        for l in range(num_long):
            rows.append(s)
            cols.append(l)
            vals.append(-coeff[s, l])
    rows.extend([scen.num_sensors] * num_long)
    cols.extend(range(num_long))
    vals.extend([1.0] * num_long)
    a_ub = sp.coo_matrix((vals, (rows, cols)), shape=(scen.num_sensors + 1, num_var))
    b_ub = np.concatenate([np.zeros(scen.num_sensors), [scen.period]])
    c = np.zeros(num_var)
    c[-1] = -1.0
    bounds = [(float(lo), float(scen.period)) for lo in lb] + [(0.0, None)]
    res = linprog(c, A_ub=a_ub.tocsr(), b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"duration LP failed: {res.message}")
    t = _repair_durations(res.x[:num_long], lengths, scen.v_max, scen.period)

    taus = np.repeat(t / per_long, per_long)
    achieved = float(
        (np.asarray(alpha) * taus[None, :] * u).sum(axis=1).min() / scen.period
    )
    return t, achieved


def _surrogate_budget(
    spec: ProblemSpec, points0: np.ndarray, alpha: np.ndarray, durations: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sensor linearized budget terms at the current short endpoints.

    Returns (const, beta): the concave surrogate of sensor s reads
    const[s] - sum_k beta[s,k] * ||p_k - w_s_xy||^2 and lower-bounds the
    (tightened) true rate, with equality at points0. beta >= 0 always,
    which is what makes the budget a second-order cone.
    """
    scen = spec.scenario
    _, per_long, _ = _structure(spec.scheme)
    taus = np.repeat(np.asarray(durations, dtype=float) / per_long, per_long)
    w = scen.sensor_array
    gamma = scen.snr_scales
    dz2 = (scen.h_min - w[:, 2]) ** 2
    diff0 = points0[None, :, :] - w[:, None, :2]
    z0 = (diff0**2).sum(axis=2) + dz2[:, None]
    u0 = np.log2(1.0 + gamma[:, None] / z0)
    kappa = gamma[:, None] / (LN2 * z0 * (z0 + gamma[:, None]))
    phi = 1.0 / (scen.period * (1.0 + scen.epsilon_robust))
    weight = np.asarray(alpha) * taus[None, :] * phi
    beta = weight * kappa
    const = (weight * u0).sum(axis=1) + (beta * (z0 - dz2[:, None])).sum(axis=1)
    return const, beta


def _solve_socp(
    num_var: int,
    eta_col: int,
    budget_blocks: list[tuple[sp.spmatrix, np.ndarray, float]],
    cap_blocks: list[tuple[sp.spmatrix, float]],
    pin_rows: sp.spmatrix,
    pin_vals: np.ndarray,
    backend: ClarabelBackend,
) -> np.ndarray:
    cones = []
    eta_coeffs = np.zeros(num_var)
    eta_coeffs[eta_col] = 1.0
    for w_rows, shift, bound in budget_blocks:
        if bound > 0.0:
            # rescale each budget inequality by its constant term: the raw
            # quadratic coefficients can sit ten orders below the bound,
            # which leaves nearly linear rotated cones the interior-point
            # solver stalls on; dividing through by the bound is exact and
            # keeps the cone data O(1)
            root = float(np.sqrt(bound))
            cones.append(
                quadratic_budget_cone(w_rows / root, shift / root, eta_coeffs / bound, 1.0)
            )
        else:
            cones.append(quadratic_budget_cone(w_rows, shift, eta_coeffs, bound))
    for f_rows, cap in cap_blocks:
        cones.append(SecondOrderCone(F=f_rows, g=np.zeros(f_rows.shape[0]), u=None, v=cap))
    c = np.zeros(num_var)
    c[eta_col] = -1.0
    prog = ConicProgram(c=c, a_eq=pin_rows, b_eq=pin_vals, cones=cones)
    return backend.solve(prog).x


def sca_waypoint_step(
    spec: ProblemSpec,
    desig_xy: np.ndarray,
    durations: np.ndarray,
    alpha: np.ndarray,
    backend: ClarabelBackend | None = None,
) -> np.ndarray:
    """One convex step of the waypoint block.

    Maximizes the epigraph variable of the concave rate surrogates subject
    to per-long-segment length caps min(J*max_segment, t_l*v_max) and exact
    endpoint pins. Returns the new designable waypoints; the caller decides
    acceptance against the true objective.
    """
    backend = backend or ClarabelBackend(tol=spec.config.conic_kkt_tol)
    scen = spec.scenario
    num_long, per_long, _ = _structure(spec.scheme)
    num_pts = num_long + 1
    num_var = 2 * num_pts + 1
    eta_col = num_var - 1

    points0 = _short_points(desig_xy, per_long)[1:]
    const, beta = _surrogate_budget(spec, points0, alpha, durations)

    frac = np.tile(np.arange(1, per_long + 1) / per_long, num_long)
    seg_of = np.repeat(np.arange(num_long), per_long)
    w_xy = scen.sensor_array[:, :2]

    budget_blocks = []
    for s in range(scen.num_sensors):
        mask = beta[s] > 0.0
        idx = np.nonzero(mask)[0]
        if idx.size == 0:
            budget_blocks.append((sp.csr_matrix((1, num_var)), np.zeros(1), float(const[s])))
            continue
        root = np.sqrt(beta[s, idx])
        lam = frac[idx]
        left = seg_of[idx]
        rows_i, cols_i, vals_i, shift = [], [], [], []
        for r, (rt, lm, lf) in enumerate(zip(root, lam, left)):
            for d in range(2):
                row = 2 * r + d
                if lm < 1.0:
                    rows_i.append(row)
                    cols_i.append(2 * lf + d)
                    vals_i.append(rt * (1.0 - lm))
                rows_i.append(row)
                cols_i.append(2 * (lf + 1) + d)
                vals_i.append(rt * lm)
                shift.append(-rt * w_xy[s, d])
        w_rows = sp.coo_matrix((vals_i, (rows_i, cols_i)), shape=(2 * idx.size, num_var)).tocsr()
        budget_blocks.append((w_rows, np.array(shift), float(const[s])))

    caps = _caps(spec, durations)
    if _structure(spec.scheme)[2]:
        # fixed grids cannot absorb conic slack through a duration repair,
        # so leave solver-tolerance headroom inside the length caps
        caps = caps * (1.0 - 100.0 * spec.config.conic_kkt_tol)
    cap_blocks = []
    for l in range(num_long):
        rows_i = [0, 0, 1, 1]
        cols_i = [2 * (l + 1), 2 * l, 2 * (l + 1) + 1, 2 * l + 1]
        vals_i = [1.0, -1.0, 1.0, -1.0]
        f = sp.coo_matrix((vals_i, (rows_i, cols_i)), shape=(2, num_var)).tocsr()
        cap_blocks.append((f, float(caps[l])))

    pin_rows = sp.coo_matrix(
        (
            [1.0, 1.0, 1.0, 1.0],
            ([0, 1, 2, 3], [0, 1, 2 * num_long, 2 * num_long + 1]),
        ),
        shape=(4, num_var),
    ).tocsr()
    pin_vals = np.array([scen.q_start.x, scen.q_start.y, scen.q_end.x, scen.q_end.y])

    x = _solve_socp(num_var, eta_col, budget_blocks, cap_blocks, pin_rows, pin_vals, backend)
    return x[: 2 * num_pts].reshape(num_pts, 2)


def sca_coeff_step(
    spec: ProblemSpec,
    coeffs: np.ndarray,
    durations: np.ndarray,
    alpha: np.ndarray,
    backend: ClarabelBackend | None = None,
) -> np.ndarray:
    """One convex step of the coefficient block for compressed schemes.

    Identical surrogate to the waypoint step, but the decision variables are
    the 2 x keep coefficient matrix; waypoints stay confined to the span of
    the selected basis rows by construction.
    """
    if not isinstance(spec.scheme, FpdPcScheme):
        raise ValueError("coefficient steps apply only to compressed schemes")
    backend = backend or ClarabelBackend(tol=spec.config.conic_kkt_tol)
    scen = spec.scenario
    scheme = spec.scheme
    raw_rows = _scheme_rows(scheme)
    keep = scheme.keep
    num_long, per_long = scheme.num_long, scheme.short_per_long
    num_var = 2 * keep + 1
    eta_col = num_var - 1

    # The selected rows can be badly conditioned (full Fourier families reach
    # 1e13), which leaves near-flat directions the interior-point solver
    # cannot handle. Optimize over an orthonormal basis of the same row
    # space and map the answer back through the triangular factor afterward.
    q_fac, r_fac = np.linalg.qr(raw_rows.T)
    diag = np.abs(np.diag(r_fac))
    if diag.min() <= diag.max() * raw_rows.shape[1] * np.finfo(float).eps:
        raise ConicSolveError("rank-deficient")
    rows = q_fac.T

    desig_xy = (np.asarray(coeffs) @ raw_rows).T
    points0 = _short_points(desig_xy, per_long)[1:]
    const, beta = _surrogate_budget(spec, points0, alpha, durations)

    frac = np.tile(np.arange(1, per_long + 1) / per_long, num_long)
    seg_of = np.repeat(np.arange(num_long), per_long)
    # mix[k] maps coefficients of one dimension to short endpoint k
    mix = (1.0 - frac)[:, None] * rows[:, seg_of].T + frac[:, None] * rows[:, seg_of + 1].T
    w_xy = scen.sensor_array[:, :2]

    budget_blocks = []
    for s in range(scen.num_sensors):
        idx = np.nonzero(beta[s] > 0.0)[0]
        if idx.size == 0:
            budget_blocks.append((sp.csr_matrix((1, num_var)), np.zeros(1), float(const[s])))
            continue
        root = np.sqrt(beta[s, idx])
        block = np.zeros((2 * idx.size, num_var))
        shift = np.zeros(2 * idx.size)
        for r, (k, rt) in enumerate(zip(idx, root)):
            block[2 * r, :keep] = rt * mix[k]
            block[2 * r + 1, keep : 2 * keep] = rt * mix[k]
            shift[2 * r] = -rt * w_xy[s, 0]
            shift[2 * r + 1] = -rt * w_xy[s, 1]
        budget_blocks.append((sp.csr_matrix(block), shift, float(const[s])))

    caps = _caps(spec, durations)
    cap_blocks = []
    for l in range(num_long):
        dvec = rows[:, l + 1] - rows[:, l]
        f = np.zeros((2, num_var))
        f[0, :keep] = dvec
        f[1, keep : 2 * keep] = dvec
        cap_blocks.append((sp.csr_matrix(f), float(caps[l])))

    pin = np.zeros((4, num_var))
    pin[0, :keep] = rows[:, 0]
    pin[1, keep : 2 * keep] = rows[:, 0]
    pin[2, :keep] = rows[:, num_long]
    pin[3, keep : 2 * keep] = rows[:, num_long]
    pin_vals = np.array([scen.q_start.x, scen.q_start.y, scen.q_end.x, scen.q_end.y])

    x = _solve_socp(
        num_var, eta_col, budget_blocks, cap_blocks, sp.csr_matrix(pin), pin_vals, backend
    )
    ortho = np.stack([x[:keep], x[keep : 2 * keep]])
    # back to original-basis coefficients: c @ r_fac.T = ortho, one
    # refinement pass against the triangular factor's conditioning
    c_new = solve_triangular(r_fac, ortho.T, lower=False).T
    resid = ortho - c_new @ r_fac.T
    c_new = c_new + solve_triangular(r_fac, resid.T, lower=False).T
    return c_new


def bcd_solve(
    spec: ProblemSpec,
    backend: ClarabelBackend | None = None,
    radius_factor: float = 1.0,
) -> Solution:
    """Full block-coordinate descent from the deterministic initial point.

    Visits the configured blocks each iteration, accepting a block's output
    only when the true objective does not decrease; stops on relative
    improvement below bcd_rel_tol or the iteration budget. Two consecutive
    iterations whose waypoint block fails before making any step mark the
    result degraded and stop early.
    """
    t_start = time.perf_counter()
    cfg = spec.config
    backend = backend or ClarabelBackend(tol=cfg.conic_kkt_tol)
    scen = spec.scenario
    _, per_long, fixed_durations = _structure(spec.scheme)
    compressed = isinstance(spec.scheme, FpdPcScheme)

    state = initialize(spec, radius_factor=radius_factor)
    obj, rates, traj, schedule = evaluate(spec, state)
    log = [obj]
    block_seconds = {b: 0.0 for b in _BLOCKS}
    block_solves = {b: 0 for b in _BLOCKS}
    failed_streak = 0
    status = "ok"

    for _ in range(cfg.bcd_max_iters):
        prev_obj = obj
        waypoint_failed_clean = False
        for blockname in cfg.block_order:
            t_block = time.perf_counter()
            if blockname == "schedule":
                u = _rate_matrix(traj, scen)
                cand_sched, _ = solve_schedule(
                    u, traj.duration_array, scen.period, scen.epsilon_robust
                )
                block_solves["schedule"] += 1
                cand = SolverState(state.desig_xy, state.durations, cand_sched.alpha, state.coeffs)
                cand_obj, cand_rates, cand_traj, cand_schedule = evaluate(spec, cand)
                if cand_obj >= obj:
                    state, obj, rates, traj, schedule = cand, cand_obj, cand_rates, cand_traj, cand_schedule
            elif blockname == "durations":
                if not fixed_durations:
                    t_new, _ = solve_durations(spec, state.desig_xy, state.alpha)
                    block_solves["durations"] += 1
                    cand = SolverState(state.desig_xy, t_new, state.alpha, state.coeffs)
                    cand_obj, cand_rates, cand_traj, cand_schedule = evaluate(spec, cand)
                    if cand_obj >= obj:
                        state, obj, rates, traj, schedule = cand, cand_obj, cand_rates, cand_traj, cand_schedule
            elif blockname == "waypoints":
                made_step = False
                for _inner in range(cfg.sca_max_iters):
                    try:
                        if compressed:
                            new_coeffs = sca_coeff_step(
                                spec, state.coeffs, state.durations, state.alpha, backend
                            )
                            new_desig = (new_coeffs @ _scheme_rows(spec.scheme)).T
                        else:
                            new_coeffs = None
                            new_desig = sca_waypoint_step(
                                spec, state.desig_xy, state.durations, state.alpha, backend
                            )
                        block_solves["waypoints"] += 1
                    except ConicSolveError:
                        if not made_step:
                            waypoint_failed_clean = True
                        break
                    cand = SolverState(new_desig, state.durations, state.alpha, new_coeffs)
                    try:
                        cand_obj, cand_rates, cand_traj, cand_schedule = evaluate(spec, cand)
                    except InfeasibleDurationsError:
                        break
                    if cand_obj < obj:
                        break
                    gain = cand_obj - obj
                    state, obj, rates, traj, schedule = cand, cand_obj, cand_rates, cand_traj, cand_schedule
                    made_step = True
                    if gain <= cfg.sca_rel_tol * max(abs(obj), 1e-12):
                        break
            block_seconds[blockname] += time.perf_counter() - t_block
        log.append(obj)
        failed_streak = failed_streak + 1 if waypoint_failed_clean else 0
        if failed_streak >= 2:
            status = "degraded"
            break
        if obj - prev_obj <= cfg.bcd_rel_tol * max(abs(prev_obj), 1e-12):
            break

    violations = validate_trajectory(traj, scen)
    if violations:
        raise RuntimeError(f"solver produced an invalid trajectory: {violations}")

    designable = tuple(
        Position3(float(x), float(y), scen.h_min) for x, y in state.desig_xy
    )
    return Solution(
        trajectory=traj,
        designable=designable,
        coeffs=None if state.coeffs is None else np.array(state.coeffs),
        schedule=schedule,
        rates=rates,
        objective=obj,
        iterations=log,
        wall_time_s=time.perf_counter() - t_start,
        status=status,
        block_seconds=block_seconds,
        block_solves=block_solves,
    )
