"""Geometry, kinematics, and the line-of-sight channel model.

Everything downstream works in SI units: meters, seconds, watts, bits/s/Hz.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

REL_TOL = 1e-9
ABS_TOL = 1e-12

LN2 = math.log(2.0)


class DegenerateSegmentError(ValueError):
    """A trajectory segment has zero traversal time."""


class InfiniteRateError(ValueError):
    """Transmitter and receiver coincide, so the free-space rate diverges."""


@dataclass(frozen=True)
class Position3:
    """Cartesian position in meters; z is altitude above ground."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "z"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValueError(f"{name} must be a finite number, got {v!r}")
        if self.z < 0.0:
            raise ValueError(f"altitude must be nonnegative, got {self.z}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @staticmethod
    def from_array(a) -> "Position3":
        x, y, z = (float(v) for v in a)
        return Position3(x, y, z)

    def distance_to(self, other: "Position3") -> float:
        return math.dist((self.x, self.y, self.z), (other.x, other.y, other.z))

    def horizontal_distance_to(self, other: "Position3") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Scenario:
    """Sensors on (or near) the ground, channel constants, kinematic limits.

    beta0 is the linear channel power gain at 1 m; noise_power is the receiver
    noise in watts; tx_powers holds one transmit power per sensor.
    epsilon_robust >= 0 tightens rate expressions inside solver subproblems
    by the factor 1/(1+epsilon_robust); it never changes reported rates.
    """

    sensors: tuple[Position3, ...]
    tx_powers: tuple[float, ...]
    beta0: float
    noise_power: float
    h_min: float
    v_max: float
    period: float
    q_start: Position3
    q_end: Position3
    epsilon_robust: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "sensors", tuple(self.sensors))
        object.__setattr__(self, "tx_powers", tuple(float(p) for p in self.tx_powers))
        if len(self.sensors) == 0:
            raise ValueError("scenario needs at least one sensor")
        if len(self.tx_powers) != len(self.sensors):
            raise ValueError(
                f"{len(self.sensors)} sensors but {len(self.tx_powers)} transmit powers"
            )
        if any(p <= 0 or not math.isfinite(p) for p in self.tx_powers):
            raise ValueError("transmit powers must be positive and finite")
        for name in ("beta0", "noise_power", "h_min", "v_max", "period"):
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        if self.epsilon_robust < 0 or not math.isfinite(self.epsilon_robust):
            raise ValueError("epsilon_robust must be finite and nonnegative")
        # sensors must sit below the flight altitude, else the in-plane
        # gradient bound is undefined
        for i, w in enumerate(self.sensors):
            if w.z >= self.h_min:
                raise ValueError(
                    f"sensor {i} at z={w.z} is not below the minimum altitude {self.h_min}"
                )
        min_time = self.q_start.distance_to(self.q_end) / self.v_max
        if self.period < min_time * (1.0 - REL_TOL) - ABS_TOL:
            raise ValueError(
                f"period {self.period} s cannot cover the start-end distance "
                f"(needs >= {min_time} s at v_max)"
            )

    @property
    def num_sensors(self) -> int:
        return len(self.sensors)

    @cached_property
    def sensor_array(self) -> np.ndarray:
        a = np.array([w.as_array() for w in self.sensors])
        a.flags.writeable = False
        return a

    @cached_property
    def snr_scales(self) -> np.ndarray:
        """Reference SNR at 1 m per sensor: P_s * beta0 / noise_power."""
        a = np.array(self.tx_powers) * self.beta0 / self.noise_power
        a.flags.writeable = False
        return a


@dataclass(frozen=True)
class PiecewiseTrajectory:
    """N+1 ordered waypoints flown as straight segments with given durations.

    The path occupies waypoint k at time sum(durations[:k]) and moves at
    constant velocity in between. Durations are strictly positive; whether
    the trajectory also respects a scenario's speed/period/endpoint limits
    is reported by validate_trajectory, not enforced here.
    """

    waypoints: tuple[Position3, ...]
    durations: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        object.__setattr__(self, "durations", tuple(float(t) for t in self.durations))
        if len(self.waypoints) < 2:
            raise ValueError("a trajectory needs at least two waypoints")
        if len(self.durations) != len(self.waypoints) - 1:
            raise ValueError(
                f"{len(self.waypoints)} waypoints need {len(self.waypoints) - 1} "
                f"durations, got {len(self.durations)}"
            )
        if any(not math.isfinite(t) or t <= 0.0 for t in self.durations):
            raise ValueError("segment durations must be positive and finite")

    @property
    def num_segments(self) -> int:
        return len(self.durations)

    @property
    def total_time(self) -> float:
        return float(sum(self.durations))

    @cached_property
    def waypoint_array(self) -> np.ndarray:
        a = np.array([q.as_array() for q in self.waypoints])
        a.flags.writeable = False
        return a

    @cached_property
    def duration_array(self) -> np.ndarray:
        a = np.array(self.durations)
        a.flags.writeable = False
        return a


@dataclass(frozen=True, eq=False)
class Schedule:
    """Relaxed TDMA allocation: alpha[s, n] in [0, 1], column sums <= 1."""

    alpha: np.ndarray

    def __post_init__(self) -> None:
        a = np.array(self.alpha, dtype=float)
        if a.ndim != 2:
            raise ValueError(f"alpha must be 2-D (sensors x segments), got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("alpha entries must be finite")
        if a.min(initial=0.0) < -REL_TOL or a.max(initial=0.0) > 1.0 + REL_TOL:
            raise ValueError("alpha entries must lie in [0, 1]")
        col = a.sum(axis=0)
        if col.size and col.max() > 1.0 + REL_TOL:
            raise ValueError(f"schedule column sums exceed 1 (max {col.max()})")
        a.flags.writeable = False
        object.__setattr__(self, "alpha", a)

    @property
    def num_sensors(self) -> int:
        return self.alpha.shape[0]

    @property
    def num_segments(self) -> int:
        return self.alpha.shape[1]

    @staticmethod
    def uniform(num_sensors: int, num_segments: int) -> "Schedule":
        return Schedule(np.full((num_sensors, num_segments), 1.0 / num_sensors))


def segment_velocities(traj: PiecewiseTrajectory) -> np.ndarray:
    """Per-segment velocity vectors, shape (N, 3)."""
    t = traj.duration_array
    if np.any(t == 0.0):
        raise DegenerateSegmentError("zero-duration segment has no velocity")
    return np.diff(traj.waypoint_array, axis=0) / t[:, None]


def spectral_efficiency(
    q: Position3, w: Position3, p_tx: float, beta0: float, noise_power: float
) -> float:
    """Achievable rate log2(1 + p*beta0 / (d^2 * noise)) in bits/s/Hz."""
    d2 = (q.x - w.x) ** 2 + (q.y - w.y) ** 2 + (q.z - w.z) ** 2
    if d2 == 0.0:
        raise InfiniteRateError("positions coincide; free-space rate diverges")
    return math.log2(1.0 + p_tx * beta0 / (d2 * noise_power))


def rate_map(points_xy: np.ndarray, scenario: Scenario, altitude: float) -> np.ndarray:
    """Spectral efficiency of every sensor at every horizontal point.

    points_xy has shape (K, 2); the result has shape (S, K). Vectorized
    counterpart of spectral_efficiency for a fixed flight altitude.
    """
    pts = np.asarray(points_xy, dtype=float)
    w = scenario.sensor_array
    dz2 = (altitude - w[:, 2]) ** 2
    d2 = ((pts[None, :, :] - w[:, None, :2]) ** 2).sum(axis=2) + dz2[:, None]
    return np.log2(1.0 + scenario.snr_scales[:, None] / d2)


def validate_trajectory(
    traj: PiecewiseTrajectory, scenario: Scenario, fixed_altitude: bool = True
) -> list[str]:
    """Constraint violations of a trajectory against a scenario; empty when clean.

    Checks endpoint pinning, per-segment speed, total time, and (when
    fixed_altitude) that every waypoint sits at h_min. Tolerances: 1e-9
    relative with a 1e-12 absolute floor.
    """

    def over(value: float, limit: float) -> bool:
        return value > limit + REL_TOL * max(abs(limit), 1.0) + ABS_TOL

    violations: list[str] = []
    q = traj.waypoint_array
    t = traj.duration_array

    for name, have, want in (
        ("start", traj.waypoints[0], scenario.q_start),
        ("end", traj.waypoints[-1], scenario.q_end),
    ):
        err = have.distance_to(want)
        if err > REL_TOL * max(1.0, abs(want.x), abs(want.y), abs(want.z)) + ABS_TOL:
            violations.append(f"{name} waypoint off by {err:.3e} m")

    lengths = np.linalg.norm(np.diff(q, axis=0), axis=1)
    speeds = lengths / t
    for n, v in enumerate(speeds):
        if over(v, scenario.v_max):
            violations.append(f"segment {n}: speed {v:.6f} exceeds v_max {scenario.v_max}")

    total = traj.total_time
    if over(total, scenario.period):
        violations.append(f"total time {total:.9f} exceeds period {scenario.period}")

    if fixed_altitude:
        dz = np.abs(q[:, 2] - scenario.h_min)
        bad = np.nonzero(dz > REL_TOL * scenario.h_min + ABS_TOL)[0]
        if bad.size:
            violations.append(
                f"{bad.size} waypoints off the flight altitude {scenario.h_min} "
                f"(max deviation {dz.max():.3e} m)"
            )

    return violations
