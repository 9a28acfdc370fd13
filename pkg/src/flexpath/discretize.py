"""Discretization schemes, finite-sum rate evaluation, and error budgets.

A continuous trajectory's harvested data is approximated by evaluating the
rate at each segment's terminal waypoint and weighting by the segment
duration. The approximation error over a period is bounded by
(1/2) * D * Delta * T where D bounds the in-plane rate gradient and Delta
bounds the segment length; inverting that bound for a user error budget
yields the longest admissible segment and hence the coarsest admissible
discretization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    ABS_TOL,
    LN2,
    REL_TOL,
    PiecewiseTrajectory,
    Position3,
    Scenario,
    Schedule,
)


class DiscretizationAccuracyError(ValueError):
    """A segment exceeds the length admitted by the accuracy budget."""


def snr_scale(p_tx: float, beta0: float, noise_power: float) -> float:
    """Reference SNR at 1 m distance (dimensionless): p*beta0/noise."""
    if p_tx <= 0 or beta0 <= 0 or noise_power <= 0:
        raise ValueError("powers and channel gain must be positive")
    return p_tx * beta0 / noise_power

def peak_gradient_radius(scale: float, altitude: float) -> float:
    """Horizontal offset (m) where the in-plane rate gradient is largest.

    For u(r) = log2(1 + scale/(r^2 + h^2)), |du/dr| peaks at the positive
    root of 3 x^2 + (2 h^2 + scale) x - (h^4 + h^2 scale) = 0, x = r^2.
    As scale -> 0 the radius tends to h/sqrt(3); it shrinks toward zero only
    as scale -> infinity.
    """
    if altitude <= 0:
        raise ValueError("altitude must be positive")
    if scale < 0:
        raise ValueError("snr scale must be nonnegative")
    h2 = altitude * altitude
    disc = math.sqrt(16.0 * h2 * h2 + 16.0 * scale * h2 + scale * scale)
    x = (disc - (2.0 * h2 + scale)) / 6.0
    return math.sqrt(max(x, 0.0))

def max_in_plane_gradient(scale: float, altitude: float) -> float:
    """Largest |d/dr log2(1 + scale/(r^2+h^2))| over horizontal offset r.

    Attained at r = peak_gradient_radius; units bits/s/Hz per meter.
    """
    c1 = peak_gradient_radius(scale, altitude)
    d2 = c1 * c1 + altitude * altitude
    return (2.0 * scale / LN2) * c1 / (d2 * (d2 + scale))


@dataclass(frozen=True)
class SegmentBounds:
    """Accuracy-budget chain for one scenario.

    peak_radius_m / snr_scale describe the binding sensor (the one with the
    steepest rate gradient); gradient_bound is that gradient in bits/s/Hz/m;
    max_segment_m is the longest segment that keeps the per-period
    finite-sum rate error within error_budget bits/s/Hz * s.
    """

    peak_radius_m: float
    snr_scale: float
    gradient_bound: float
    max_segment_m: float
    error_budget: float

    def __post_init__(self) -> None:
        for name in ("peak_radius_m", "snr_scale", "gradient_bound", "max_segment_m", "error_budget"):
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be positive and finite, got {v!r}")


def binding_sensor_terms(scenario: Scenario) -> tuple[float, float, int]:
    """(peak radius, snr scale, sensor index) of the steepest-gradient sensor."""
    best = None
    for i, w in enumerate(scenario.sensors):
        h = scenario.h_min - w.z
        sc = float(scenario.snr_scales[i])
        g = max_in_plane_gradient(sc, h)
        if best is None or g > best[0]:
            best = (g, peak_gradient_radius(sc, h), sc, i)
    return best[1], best[2], best[3]

def max_rate_gradient(scenario: Scenario) -> float:
    """Max over sensors of the in-plane rate-gradient bound."""
    grads = []
    for i, w in enumerate(scenario.sensors):
        h = scenario.h_min - w.z
        grads.append(max_in_plane_gradient(float(scenario.snr_scales[i]), h))
    return max(grads)

def max_segment_length(error_budget: float, period: float, gradient: float) -> float:
    """Longest segment keeping the finite-sum error within the budget:
    Delta = 2 E / (T * D)."""
    if error_budget <= 0 or period <= 0 or gradient <= 0:
        raise ValueError("budget, period, and gradient must be positive")
    return 2.0 * error_budget / (period * gradient)

def rate_error_bound(gradient: float, segment_length: float, period: float) -> float:
    """Finite-sum data error bound over one period: (1/2) * D * Delta * T."""
    if gradient < 0 or segment_length < 0 or period <= 0:
        raise ValueError("gradient and segment length must be nonnegative, period positive")
    return 0.5 * gradient * segment_length * period

def derive_segment_bounds(scenario: Scenario, error_budget: float) -> SegmentBounds:
    """Run the full chain budget -> gradient bound -> max segment length."""
    radius, scale, _ = binding_sensor_terms(scenario)
    gradient = max_rate_gradient(scenario)
    delta = max_segment_length(error_budget, scenario.period, gradient)
    return SegmentBounds(
        peak_radius_m=radius,
        snr_scale=scale,
        gradient_bound=gradient,
        max_segment_m=delta,
        error_budget=error_budget,
    )


@dataclass(frozen=True)
class TdGrid:
    """Uniform time grid: num_slots slots of slot_s seconds each."""

    num_slots: int
    slot_s: float

    def __post_init__(self) -> None:
        if self.num_slots < 1:
            raise ValueError("grid needs at least one slot")
        if not math.isfinite(self.slot_s) or self.slot_s <= 0:
            raise ValueError("slot length must be positive")


def make_td_grid(scenario: Scenario, max_segment: float) -> TdGrid:
    """Smallest uniform grid whose slots cannot exceed max_segment at v_max."""
    if max_segment <= 0:
        raise ValueError("max_segment must be positive")
    m = max(1, math.ceil(scenario.period * scenario.v_max / max_segment - 1e-9))
    return TdGrid(num_slots=m, slot_s=scenario.period / m)

def min_segment_count(q_start: Position3, q_end: Position3, max_segment: float) -> int:
    """Fewest segments of length <= max_segment that can span start to end."""
    if max_segment <= 0:
        raise ValueError("max_segment must be positive")
    dist = q_start.distance_to(q_end)
    return max(0, math.ceil(dist / max_segment - 1e-9))


@dataclass(frozen=True)
class FpdPath:
    """Sparse designable skeleton: L+1 designable waypoints, L durations.

    Each long segment is flown in short_per_long equal-duration short
    segments whose interior waypoints interpolate the designable endpoints
    uniformly; only the designable waypoints and long-segment durations are
    free variables.
    """

    designable: tuple[Position3, ...]
    durations: tuple[float, ...]
    short_per_long: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "designable", tuple(self.designable))
        object.__setattr__(self, "durations", tuple(float(t) for t in self.durations))
        if len(self.designable) < 2:
            raise ValueError("need at least two designable waypoints")
        if len(self.durations) != len(self.designable) - 1:
            raise ValueError(
                f"{len(self.designable)} designable waypoints need "
                f"{len(self.designable) - 1} durations, got {len(self.durations)}"
            )
        if any(not math.isfinite(t) or t <= 0 for t in self.durations):
            raise ValueError("durations must be positive and finite")
        if self.short_per_long < 1:
            raise ValueError("short_per_long must be >= 1")

    @property
    def num_long(self) -> int:
        return len(self.durations)


def expand_fpd(path: FpdPath, max_segment: float | None = None) -> PiecewiseTrajectory:
    """Materialize the dense piecewise-linear trajectory of an FpdPath.

    Long segment l contributes short waypoints q_{l-1} + (j/J)(q_l - q_{l-1})
    for j = 1..J, each flown for durations[l]/J. When max_segment is given,
    a long segment longer than J*max_segment (so a short segment longer than
    max_segment) raises DiscretizationAccuracyError.
    """
    j_count = path.short_per_long
    desig = np.array([q.as_array() for q in path.designable])
    if max_segment is not None:
        lengths = np.linalg.norm(np.diff(desig, axis=0), axis=1)
        cap = j_count * max_segment
        bad = np.nonzero(lengths > cap * (1.0 + REL_TOL) + ABS_TOL)[0]
        if bad.size:
            raise DiscretizationAccuracyError(
                f"long segment {bad[0]} has length {lengths[bad[0]]:.6f} m, over the "
                f"{cap:.6f} m admitted by short_per_long * max_segment"
            )
    if j_count == 1:
        return PiecewiseTrajectory(path.designable, path.durations)
    pts = [desig[0]]
    durs = []
    for l in range(path.num_long):
        a, b = desig[l], desig[l + 1]
        for j in range(1, j_count + 1):
            pts.append(a + (j / j_count) * (b - a))
            durs.append(path.durations[l] / j_count)
    waypoints = tuple(Position3.from_array(p) for p in pts)
    return PiecewiseTrajectory(waypoints, tuple(durs))


def _check_schedule_shape(schedule: Schedule, scenario: Scenario, num_segments: int) -> None:
    if schedule.num_sensors != scenario.num_sensors:
        raise ValueError(
            f"schedule has {schedule.num_sensors} sensor rows, scenario has "
            f"{scenario.num_sensors} sensors"
        )
    if schedule.num_segments != num_segments:
        raise ValueError(
            f"schedule covers {schedule.num_segments} segments, trajectory has {num_segments}"
        )


def finite_sum_rates(
    traj: PiecewiseTrajectory, scenario: Scenario, schedule: Schedule
) -> np.ndarray:
    """Per-sensor average rate of the segment-endpoint finite sum, bits/s/Hz.

    R_s = (1/T) * sum_n alpha[s,n] * t_n * log2(1 + snr_s / d^2(q_n, w_s))
    with q_n the terminal waypoint of segment n and T the scenario period.
    """
    _check_schedule_shape(schedule, scenario, traj.num_segments)
    q = traj.waypoint_array[1:]
    w = scenario.sensor_array
    d2 = ((q[None, :, :] - w[:, None, :]) ** 2).sum(axis=2)
    if np.any(d2 == 0.0):
        raise ValueError("a segment endpoint coincides with a sensor; rate diverges")
    u = np.log2(1.0 + scenario.snr_scales[:, None] / d2)
    weighted = schedule.alpha * traj.duration_array[None, :] * u
    return weighted.sum(axis=1) / scenario.period


def integrate_rates(
    traj: PiecewiseTrajectory,
    scenario: Scenario,
    schedule: Schedule,
    substeps_per_segment: int = 1000,
) -> np.ndarray:
    """Quadrature reference for the per-sensor average rates, bits/s/Hz.

    Composite midpoint rule along each segment (the allocation is constant
    within a segment). Second-order convergent: doubling substeps changes
    the result at the 1e-8 relative level or below for admissible segments.
    """
    if substeps_per_segment < 100:
        raise ValueError("need at least 100 substeps per segment for a trustworthy reference")
    _check_schedule_shape(schedule, scenario, traj.num_segments)
    q = traj.waypoint_array
    t = traj.duration_array
    w = scenario.sensor_array
    frac = (np.arange(substeps_per_segment) + 0.5) / substeps_per_segment
    totals = np.zeros(scenario.num_sensors)
    for n in range(traj.num_segments):
        pts = q[n][None, :] + frac[:, None] * (q[n + 1] - q[n])[None, :]
        d2 = ((pts[None, :, :] - w[:, None, :]) ** 2).sum(axis=2)
        if np.any(d2 == 0.0):
            raise ValueError("trajectory passes through a sensor; rate diverges")
        u_mean = np.log2(1.0 + scenario.snr_scales[:, None] / d2).mean(axis=1)
        totals += schedule.alpha[:, n] * t[n] * u_mean
    return totals / scenario.period


def fpd_rates(path: FpdPath, scenario: Scenario, schedule: Schedule) -> np.ndarray:
    """Per-sensor rates computed directly from the designable skeleton.

    Evaluates the interpolated short-segment endpoints without materializing
    a PiecewiseTrajectory; agrees with finite_sum_rates(expand_fpd(path))
    """
    j_count = path.short_per_long
    _check_schedule_shape(schedule, scenario, path.num_long * j_count)
    desig = np.array([p.as_array() for p in path.designable])
    w = scenario.sensor_array
    totals = np.zeros(scenario.num_sensors)
    for l in range(path.num_long):
        a, b = desig[l], desig[l + 1]
        frac = np.arange(1, j_count + 1)[:, None] / j_count
        pts = a[None, :] + frac * (b - a)[None, :]
        d2 = ((pts[None, :, :] - w[:, None, :]) ** 2).sum(axis=2)
        if np.any(d2 == 0.0):
            raise ValueError("a short-segment endpoint coincides with a sensor")
        u = np.log2(1.0 + scenario.snr_scales[:, None] / d2)
        cols = slice(l * j_count, (l + 1) * j_count)
        totals += (schedule.alpha[:, cols] * u).sum(axis=1) * (path.durations[l] / j_count)
    return totals / scenario.period


def compress_constant_velocity_runs(
    traj: PiecewiseTrajectory, max_segment: float | None = None
) -> PiecewiseTrajectory:
    """Merge consecutive equal-velocity segments into single segments.

    The flown path is pointwise unchanged; only interior waypoints on
    straight constant-speed stretches are dropped. With max_segment given,
    a merged segment never exceeds that length (the merge stops and starts
    a new segment instead), which preserves per-segment accuracy caps; with
    None, whole runs collapse regardless of length (designable-skeleton
    extraction). Velocities compare equal under 1e-9 relative per component
    with a 1e-12 floor. Idempotent in both modes.
    """
    q = traj.waypoint_array
    t = traj.duration_array
    v = np.diff(q, axis=0) / t[:, None]
    n = traj.num_segments

    def same_velocity(i: int, k: int) -> bool:
        return bool(
            np.all(np.abs(v[i] - v[k]) <= REL_TOL * np.maximum(np.abs(v[i]), np.abs(v[k])) + ABS_TOL)
        )

    def fits(first: int, last: int) -> bool:
        if max_segment is None:
            return True
        length = float(np.linalg.norm(q[last + 1] - q[first]))
        return length <= max_segment * (1.0 + REL_TOL) + ABS_TOL

    keep = [0]
    group_start = 0
    for i in range(1, n):
        if same_velocity(i - 1, i) and fits(group_start, i):
            continue
        keep.append(i)
        group_start = i
    boundaries = keep + [n]

    waypoints = tuple(traj.waypoints[b] for b in boundaries)
    durations = tuple(float(t[a:b].sum()) for a, b in zip(boundaries[:-1], boundaries[1:]))
    return PiecewiseTrajectory(waypoints, durations)
