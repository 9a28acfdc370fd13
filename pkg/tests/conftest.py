"""Shared scenario builders and hypothesis profile for the test suite."""
import numpy as np
from hypothesis import settings

from flexpath import Position3, Scenario

# conic subproblems have variable wall time; deadlines would flake
settings.register_profile("suite", deadline=None, derandomize=True)
settings.load_profile("suite")


def random_scenario(
    seed: int = 0,
    num_sensors: int = 5,
    side: float = 200.0,
    period: float = 50.0,
    tx_power: float = 0.1,
    beta0: float = 1e-3,
    noise: float = 1e-9,
    h_min: float = 100.0,
    v_max: float = 20.0,
    epsilon: float = 0.0,
    start: tuple = (0.0, 0.0),
    end: tuple | None = None,
) -> Scenario:
    """Sensors uniform on a centered square; endpoints at flight altitude."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-side / 2.0, side / 2.0, size=(num_sensors, 2))
    sensors = tuple(Position3(float(x), float(y), 0.0) for x, y in pts)
    q_start = Position3(start[0], start[1], h_min)
    q_end = q_start if end is None else Position3(end[0], end[1], h_min)
    return Scenario(
        sensors=sensors,
        tx_powers=(tx_power,) * num_sensors,
        beta0=beta0,
        noise_power=noise,
        h_min=h_min,
        v_max=v_max,
        period=period,
        q_start=q_start,
        q_end=q_end,
        epsilon_robust=epsilon,
    )


def weak_channel_scenario(seed: int = 0, **kw) -> Scenario:
    """Low reference SNR (2e2): nearly flat rate field, meter-scale caps."""
    kw.setdefault("tx_power", 0.2)
    kw.setdefault("beta0", 1e-6)
    kw.setdefault("noise", 1e-9)
    return random_scenario(seed, **kw)


def single_sensor_scenario(
    sensor_xy: tuple = (0.0, 0.0),
    period: float = 100.0,
    tx_power: float = 0.2,
    beta0: float = 1e-6,
    noise: float = 1e-9,
    h_min: float = 100.0,
    v_max: float = 20.0,
    epsilon: float = 0.0,
    start: tuple = (0.0, 0.0),
    end: tuple | None = None,
) -> Scenario:
    q_start = Position3(start[0], start[1], h_min)
    q_end = q_start if end is None else Position3(end[0], end[1], h_min)
    return Scenario(
        sensors=(Position3(sensor_xy[0], sensor_xy[1], 0.0),),
        tx_powers=(tx_power,),
        beta0=beta0,
        noise_power=noise,
        h_min=h_min,
        v_max=v_max,
        period=period,
        q_start=q_start,
        q_end=q_end,
        epsilon_robust=epsilon,
    )
