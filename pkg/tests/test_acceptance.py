"""End-to-end acceptance checks.

Each test covers one shipped guarantee, prints a single PASS/FAIL line with
the measured numbers (visible even under captured output), and asserts the
documented tolerance. Oracles here are independent of the library paths they
check: quadrature references, brute-force grids, closed forms, and a
high-precision determinant factorization.
"""
import json
import math
import time
from statistics import median

import mpmath as mp
import numpy as np

from conftest import random_scenario, single_sensor_scenario, weak_channel_scenario
from flexpath import (
    CpdScheme,
    FpdPath,
    FpdPcScheme,
    FpdScheme,
    PiecewiseTrajectory,
    Position3,
    ProblemSpec,
    Scenario,
    Schedule,
    SolverConfig,
    bcd_solve,
    compress,
    compress_constant_velocity_runs,
    decompose,
    derive_segment_bounds,
    expand_fpd,
    finite_sum_rates,
    fourier_basis,
    initialize,
    integrate_rates,
    make_td_grid,
    rate_error_bound,
    reconstruct,
    shifted_sine_basis,
    solve_durations,
    solve_schedule,
    spectral_efficiency,
)
from flexpath.cli import main as cli_main


def _report(capsys, label: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[acceptance] {label}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{label}: {detail}"


def _write_config(tmp_path, cfg: dict) -> str:
    p = tmp_path / "config.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def _chain_config(period_s: float) -> dict:
    return {
        "seed": 0,
        "scenario": {
            "sensors": [[0.0, 0.0]],
            "tx_power_w": 0.2,
            "beta0_db": -60.0,
            "noise_dbw": -90.0,
            "h_min_m": 100.0,
            "v_max_mps": 20.0,
            "period_s": period_s,
        },
        "scheme": {"type": "cpd", "num_segments": 4},
        "accuracy": {"error_budget": 0.05},
    }


def test_accuracy_chain_reports_segment_cap(tmp_path, capsys):
    cfg = _chain_config(period_s=100.0)
    path = _write_config(tmp_path, cfg)
    t0 = time.perf_counter()
    rc = cli_main(["bounds", "--config", path])
    dt = time.perf_counter() - t0
    derived = json.loads(capsys.readouterr().out)
    delta = derived["delta_derived_m"]
    ok = rc == 0 and 5.40 <= delta <= 5.43 and dt < 1.0
    _report(capsys, "accuracy chain", ok, f"delta_max={delta:.6f} m, {dt * 1e3:.0f} ms")


def test_uniform_grid_resolution_from_tightened_cap(tmp_path, capsys):
    cfg = _chain_config(period_s=100.0)
    cfg["scheme"] = {"type": "td"}
    cfg["accuracy"]["max_segment_m"] = 5.0
    path = _write_config(tmp_path, cfg)
    t0 = time.perf_counter()
    rc = cli_main(["bounds", "--config", path])
    dt = time.perf_counter() - t0
    derived = json.loads(capsys.readouterr().out)
    slots, slot_s = derived["num_slots"], derived["slot_s"]
    ok = rc == 0 and slots == 400 and slot_s == 0.25 and derived["delta_used_m"] == 5.0 and dt < 1.0
    _report(capsys, "uniform grid resolution", ok, f"slots={slots}, slot={slot_s} s, {dt * 1e3:.0f} ms")


def test_waypoint_counting_across_discretizations(capsys):
    # one straight out-and-back leg: 4 full-speed slots out, 8 hover slots,
    # 6 half-speed slots back, uniform 0.5 s grid
    xs = [0.0, 5.0, 10.0, 15.0] + [15.0] * 8 + [12.5, 10.0, 7.5, 5.0, 2.5, 0.0]
    pts = tuple(Position3(x, 0.0, 100.0) for x in xs)
    traj = PiecewiseTrajectory(pts, (0.5,) * (len(pts) - 1))

    scen = single_sensor_scenario(period=8.5, v_max=10.0)
    grid = make_td_grid(scen, max_segment=5.0)
    td_waypoints = grid.num_slots + 1

    capped = compress_constant_velocity_runs(traj, max_segment=5.0)
    merged = compress_constant_velocity_runs(traj, max_segment=None)
    path = FpdPath(merged.waypoints, merged.durations, short_per_long=3)
    dense = expand_fpd(path, max_segment=5.0)

    counts = (
        td_waypoints,
        len(traj.waypoints),
        len(capped.waypoints),
        capped.num_segments,
        len(path.designable),
        path.num_long,
        dense.num_segments,
    )
    ok = counts == (18, 18, 8, 7, 4, 3, 9)
    _report(
        capsys,
        "waypoint counting",
        ok,
        f"td={counts[1]} wp, capped merge={counts[2]} wp/{counts[3]} dur, "
        f"sparse={counts[4]} wp/{counts[5]} dur at 3 shorts each",
    )


def test_finite_sum_error_bound_certified_on_random_walks(capsys):
    scen = single_sensor_scenario(period=100.0)
    bounds = derive_segment_bounds(scen, 0.05)
    budget = rate_error_bound(bounds.gradient_bound, bounds.max_segment_m, scen.period)
    slots = math.ceil(scen.period * scen.v_max / bounds.max_segment_m)
    slot_s = scen.period / slots

    t0 = time.perf_counter()
    worst = 0.0
    violations = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        heading = rng.uniform(0.0, 2.0 * np.pi, slots)
        speed = rng.uniform(0.0, scen.v_max, slots)
        speed[rng.random(slots) < 0.2] = 0.0
        steps = (speed * slot_s)[:, None] * np.stack([np.cos(heading), np.sin(heading)], axis=1)
        xy = rng.uniform(-200.0, 200.0, 2) + np.vstack([np.zeros(2), np.cumsum(steps, axis=0)])
        wp = tuple(Position3(float(x), float(y), scen.h_min) for x, y in xy)
        traj = PiecewiseTrajectory(wp, (slot_s,) * slots)
        sched = Schedule.uniform(1, slots)

        data_gap = (
            abs(
                integrate_rates(traj, scen, sched, substeps_per_segment=200)[0]
                - finite_sum_rates(traj, scen, sched)[0]
            )
            * scen.period
        )
        worst = max(worst, data_gap)
        violations += data_gap > budget
    dt = time.perf_counter() - t0
    ok = violations == 0 and dt < 30.0
    _report(
        capsys,
        "finite-sum error bound",
        ok,
        f"100 walks, worst gap {worst:.3e} of budget {budget:.3e} bits/Hz, "
        f"{violations} violations, {dt:.1f} s",
    )


def _factored_logdet(order: int):
    """Exact nonsingularity certificate for the sine-family basis.

    Cofactor expansion along the constant column reduces the determinant to
    2^(L(L-1)/2) * prod_t sin(theta_t) * prod_{i<j} (cos theta_j - cos theta_i)
    with theta_t = pi t / (2L): row l entry sin(l theta_t) factors through
    second-kind Chebyshev polynomials, whose coefficient matrix is triangular
    with leading entries 2^(l-1), leaving a Vandermonde in cos theta_t.
    """
    theta = [mp.pi * t / (2 * order) for t in range(1, order + 1)]
    sines = [mp.sin(a) for a in theta]
    cosines = [mp.cos(a) for a in theta]
    gaps = [cosines[j] - cosines[i] for i in range(order) for j in range(i + 1, order)]
    log_det = (
        mp.mpf(order * (order - 1)) / 2 * mp.log(2)
        + mp.fsum(mp.log(abs(s)) for s in sines)
        + mp.fsum(mp.log(abs(g)) for g in gaps)
    )
    sign = (-1) ** sum(1 for g in gaps if g < 0)
    return log_det, sign, min(sines), min((abs(g) for g in gaps), default=mp.mpf(1))


def test_basis_rank_certificate_and_roundtrip(capsys):
    t0 = time.perf_counter()
    # certificate vs a direct high-precision determinant where that is stable
    with mp.workdps(50):
        worst_agree = mp.mpf(0)
        for order in range(1, 13):
            exact = mp.matrix(order + 1, order + 1)
            for t in range(order + 1):
                exact[0, t] = mp.mpf(1)
                for l in range(1, order + 1):
                    exact[l, t] = mp.sin(mp.pi * l * t / (2 * order))
            float_err = np.abs(
                fourier_basis(order).entries
                - np.array(exact.tolist(), dtype=float)
            ).max()
            assert float_err < 1e-14
            direct = mp.det(exact)
            log_det, sign, _, _ = _factored_logdet(order)
            rel = abs(sign * mp.e**log_det - direct) / abs(direct)
            worst_agree = max(worst_agree, rel)
        assert worst_agree < mp.mpf("1e-30")
        # factored form for every supported order: all factors bounded away
        # from zero, so the basis is nonsingular (full rank) up to order 64
        min_factor = mp.mpf(1)
        for order in range(1, 65):
            _, _, min_sine, min_gap = _factored_logdet(order)
            min_factor = min(min_factor, min_sine, min_gap)
        assert min_factor > mp.mpf("1e-4")
    for order in range(1, 13):
        assert np.linalg.matrix_rank(fourier_basis(order).entries) == order + 1

    # analysis-synthesis roundtrip and exact full-keep compression
    rng = np.random.default_rng(0)
    worst_round = worst_full = 0.0
    for _ in range(50):
        order = int(rng.integers(2, 11))
        basis = fourier_basis(order)
        q = rng.uniform(-100.0, 100.0, (3, order + 1))
        scale = np.linalg.norm(q)
        coeffs = decompose(q, basis)
        worst_round = max(worst_round, np.linalg.norm(reconstruct(coeffs, basis.entries) - q) / scale)
        full = compress(q, basis, keep=order + 1)
        worst_full = max(worst_full, np.linalg.norm(full.reconstruct() - q) / scale)
        assert full.compression_ratio == 1.0
    partial = compress(rng.uniform(-1.0, 1.0, (3, 11)), fourier_basis(10), keep=4)
    ratio_ok = partial.compression_ratio == 4 / 11
    dt = time.perf_counter() - t0
    ok = worst_round <= 1e-8 and worst_full <= 1e-8 and ratio_ok and dt < 30.0
    _report(
        capsys,
        "basis rank and roundtrip",
        ok,
        f"certificate orders 1..64, roundtrip worst {worst_round:.2e}, "
        f"full-keep worst {worst_full:.2e}, ratio 4/11 exact, {dt:.1f} s",
    )


def test_low_band_selection_beats_alternatives(capsys):
    s = np.arange(25) / 24.0
    paths = {
        "circle": np.stack([100 * np.cos(2 * np.pi * s), 100 * np.sin(2 * np.pi * s), np.full(25, 100.0)]),
        "s-curve": np.stack([300 * s, 80 * np.sin(2 * np.pi * s), np.full(25, 100.0)]),
    }
    details = []
    ok = True
    for name, q in paths.items():
        err = {
            "lfb": np.linalg.norm(q - compress(q, fourier_basis(24), 10, selection="lfb").reconstruct()),
            "ssb": np.linalg.norm(q - compress(q, shifted_sine_basis(24), 10, selection="lfb").reconstruct()),
            "hfb": np.linalg.norm(q - compress(q, fourier_basis(24), 10, selection="hfb").reconstruct()),
        }
        ok = ok and err["lfb"] < err["ssb"] < err["hfb"]
        details.append(f"{name} {err['lfb']:.3g} < {err['ssb']:.3g} < {err['hfb']:.3g}")
    _report(capsys, "band selection ordering", ok, "; ".join(details))


def test_solver_monotonicity_and_scheme_equivalences(capsys):
    t0 = time.perf_counter()
    cfg = SolverConfig(bcd_max_iters=10, sca_max_iters=6)

    def scen_for(seed):
        return weak_channel_scenario(seed, num_sensors=3, period=30.0)

    worst_drop = 0.0
    for seed in range(20):
        scen = scen_for(seed)
        dmax = derive_segment_bounds(scen, 0.05).max_segment_m
        log = np.asarray(bcd_solve(ProblemSpec(scen, FpdScheme(15, 2), dmax, cfg)).iterations)
        if len(log) > 1:
            worst_drop = min(worst_drop, float(np.diff(log).min()))

    worst_collapse = 0.0
    for seed in range(20):
        scen = scen_for(seed)
        dmax = derive_segment_bounds(scen, 0.05).max_segment_m
        a = bcd_solve(ProblemSpec(scen, FpdScheme(15, 1), dmax, cfg))
        b = bcd_solve(ProblemSpec(scen, CpdScheme(15), dmax, cfg))
        worst_collapse = max(worst_collapse, abs(a.objective - b.objective) / abs(b.objective))

    # full-keep compression spans the whole waypoint space, so the sparse and
    # compressed parameterizations must land on the same optimum when the
    # trajectory block runs under identical budgets (schedule and durations
    # held at their common initialization; interleaving the other blocks
    # amplifies coordinate tie-breaks on zero-rate segments into different
    # local basins, which is a property of block order, not the bases)
    wp_cfg = SolverConfig(
        bcd_max_iters=6, sca_max_iters=6, bcd_rel_tol=0.0, sca_rel_tol=0.0,
        block_order=("waypoints",),
    )
    worst_pc = 0.0
    for seed in range(20):
        scen = scen_for(seed)
        dmax = derive_segment_bounds(scen, 0.05).max_segment_m
        a = bcd_solve(ProblemSpec(scen, FpdScheme(15, 2), dmax, wp_cfg))
        b = bcd_solve(ProblemSpec(scen, FpdPcScheme(15, 2, keep=16), dmax, wp_cfg))
        worst_pc = max(worst_pc, abs(a.objective - b.objective) / abs(a.objective))

    dt = time.perf_counter() - t0
    ok = worst_drop >= -1e-9 and worst_collapse <= 1e-6 and worst_pc <= 1e-4 and dt < 300.0
    _report(
        capsys,
        "solver sanity",
        ok,
        f"worst log drop {worst_drop:.1e}, single-short collapse {worst_collapse:.1e}, "
        f"full-keep equivalence {worst_pc:.1e}, {dt:.1f} s",
    )


def test_block_solvers_match_brute_force_oracles(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)

    # schedule LP vs an exhaustive 0.01 grid; rates are nonnegative, so some
    # optimum saturates every column sum and the face grid is exhaustive up
    # to the grid's own rounding envelope
    u = rng.uniform(0.05, 1.5, size=(2, 3))
    t = rng.uniform(0.5, 3.0, size=3)
    _, lp_small = solve_schedule(u, t, float(t.sum()))
    coeff = u * t[None, :] / float(t.sum())
    grid = np.linspace(0.0, 1.0, 101)
    a, b, c = grid[:, None, None], grid[None, :, None], grid[None, None, :]
    s0 = coeff[0, 0] * a + coeff[0, 1] * b + coeff[0, 2] * c
    s1 = coeff[1, 0] * (1 - a) + coeff[1, 1] * (1 - b) + coeff[1, 2] * (1 - c)
    brute_small = float(np.minimum(s0, s1).max())
    env_small = 0.01 * coeff.sum(axis=1).max()
    sched_ok = brute_small <= lp_small + 1e-9 and lp_small - brute_small <= env_small
    gap_small = lp_small - brute_small

    u = rng.uniform(0.05, 1.5, size=(3, 2))
    t = rng.uniform(0.5, 3.0, size=2)
    _, lp_big = solve_schedule(u, t, float(t.sum()))
    coeff = u * t[None, :] / float(t.sum())
    simplex = np.array(
        [(i / 100.0, j / 100.0, (100 - i - j) / 100.0) for i in range(101) for j in range(101 - i)]
    )
    contrib0 = simplex * coeff[:, 0][None, :]
    contrib1 = simplex * coeff[:, 1][None, :]
    brute_big = -1.0
    for lo in range(0, len(contrib0), 600):
        block = contrib0[lo : lo + 600, None, :] + contrib1[None, :, :]
        brute_big = max(brute_big, float(block.min(axis=2).max()))
    env_big = 0.01 * coeff.sum(axis=1).max()
    sched_ok = sched_ok and brute_big <= lp_big + 1e-9 and lp_big - brute_big <= env_big
    gap_big = lp_big - brute_big

    # duration LP vs a 1e-3 line grid on a two-segment instance (rates fixed
    # by the terminal-endpoint geometry, so the objective is linear in t)
    scen = single_sensor_scenario(sensor_xy=(25.0, 0.0), period=20.0, end=(50.0, 0.0))
    spec = ProblemSpec(scen, CpdScheme(2), max_segment=30.0)
    state = initialize(spec)
    t_opt, _ = solve_durations(spec, state.desig_xy, state.alpha)
    rates = np.array(
        [
            spectral_efficiency(
                Position3(float(x), float(y), scen.h_min), scen.sensors[0],
                scen.tx_powers[0], scen.beta0, scen.noise_power,
            )
            for x, y in state.desig_xy[1:]
        ]
    )
    coeff_t = state.alpha[0] * rates / scen.period
    lengths = np.linalg.norm(np.diff(state.desig_xy, axis=0), axis=1)
    line = np.arange(lengths[0] / scen.v_max, scen.period - lengths[1] / scen.v_max, 1e-3)
    brute_t = float((coeff_t[0] * line + coeff_t[1] * (scen.period - line)).max())
    got_t = float(coeff_t @ t_opt)
    dur_gap = abs(got_t - brute_t)
    dur_ok = dur_gap <= abs(coeff_t).max() * 1e-3 + 1e-9

    # single designable waypoint vs an exhaustive 1 m grid of the exact
    # objective, restricted to the reachable chord caps
    sca_scen = Scenario(
        sensors=(Position3(-20.0, 0.0, 0.0), Position3(25.0, 10.0, 0.0)),
        tx_powers=(0.1, 0.1),
        beta0=1e-3,
        noise_power=1e-9,
        h_min=100.0,
        v_max=20.0,
        period=30.0,
        q_start=Position3(0.0, 0.0, 100.0),
        q_end=Position3(0.0, 0.0, 100.0),
    )
    sca_cfg = SolverConfig(
        bcd_max_iters=40, bcd_rel_tol=0.0, sca_max_iters=40, sca_rel_tol=0.0,
        block_order=("waypoints",),
    )
    sol = bcd_solve(ProblemSpec(sca_scen, FpdScheme(2, 1), max_segment=60.0, config=sca_cfg))
    q1 = np.array([sol.designable[1].x, sol.designable[1].y])
    gx, gy = np.meshgrid(np.arange(-50.0, 50.5, 1.0), np.arange(-50.0, 50.5, 1.0))
    w = sca_scen.sensor_array
    gamma = sca_scen.snr_scales
    per_sensor = []
    for s in range(2):
        d2 = (gx - w[s, 0]) ** 2 + (gy - w[s, 1]) ** 2 + sca_scen.h_min**2
        d2_0 = w[s, 0] ** 2 + w[s, 1] ** 2 + sca_scen.h_min**2
        per_sensor.append(
            0.5 * 15.0 * (np.log2(1.0 + gamma[s] / d2) + math.log2(1.0 + gamma[s] / d2_0)) / 30.0
        )
    surface = np.where(np.hypot(gx, gy) <= 60.0, np.minimum(*per_sensor), -np.inf)
    k = np.unravel_index(np.argmax(surface), surface.shape)
    sca_dist = float(np.hypot(q1[0] - gx[k], q1[1] - gy[k]))
    sca_ok = sol.status == "ok" and sca_dist <= 2.0

    dt = time.perf_counter() - t0
    ok = sched_ok and dur_ok and sca_ok
    _report(
        capsys,
        "block oracle equivalence",
        ok,
        f"schedule gaps {gap_small:.1e}/{gap_big:.1e} within grid envelopes, "
        f"duration gap {dur_gap:.1e}, waypoint {sca_dist:.2f} m from grid argmax, {dt:.1f} s",
    )


def test_desk_scale_accuracy_and_compression_trends(capsys):
    t0 = time.perf_counter()
    cfg = SolverConfig()
    seeds = range(5)

    def delta_for(scen):
        return derive_segment_bounds(scen, 2.0).max_segment_m

    def med(scheme_for, store_keys):
        vals = {k: [] for k in store_keys}
        for seed in seeds:
            scen = random_scenario(seed)
            dmax = delta_for(scen)
            for k in store_keys:
                sol = bcd_solve(ProblemSpec(scen, scheme_for(k), dmax, cfg))
                vals[k].append(sol.objective)
        return [median(vals[k]) for k in store_keys]

    dens = med(lambda n: FpdScheme(num_long=n // 2, short_per_long=2), (20, 40, 80))
    dens_ok = dens[0] <= dens[1] <= dens[2]

    interp = med(lambda j: FpdScheme(num_long=40 // j, short_per_long=j), (1, 2, 4))
    interp_ok = interp[0] >= interp[1] >= interp[2]

    lfb = med(lambda k: FpdPcScheme(20, 2, keep=k, basis="fourier", selection="lfb"), (3, 6, 12))
    hfb = med(lambda k: FpdPcScheme(20, 2, keep=k, basis="fourier", selection="hfb"), (3, 6, 12))
    band_ok = lfb[0] <= lfb[1] <= lfb[2] and all(l >= h for l, h in zip(lfb, hfb))

    # block cost comparison at a fixed iteration budget so every scheme runs
    # the same number of trajectory solves
    cfg_fixed = SolverConfig(bcd_max_iters=6, sca_max_iters=3, bcd_rel_tol=0.0, sca_rel_tol=0.0)
    secs = {"pc": [], "fpd": [], "cpd": []}
    for seed in seeds:
        scen = random_scenario(seed)
        dmax = delta_for(scen)
        runs = {
            "pc": FpdPcScheme(20, 2, keep=6, basis="fourier", selection="lfb"),
            "fpd": FpdScheme(num_long=20, short_per_long=2),
            "cpd": CpdScheme(num_segments=40),
        }
        for name, scheme in runs.items():
            sol = bcd_solve(ProblemSpec(scen, scheme, dmax, cfg_fixed))
            secs[name].append(sol.block_seconds["waypoints"])
    cost = {name: median(v) for name, v in secs.items()}
    cost_ok = cost["pc"] < cost["fpd"] < cost["cpd"]

    dt = time.perf_counter() - t0
    ok = dens_ok and interp_ok and band_ok and cost_ok and dt < 900.0
    _report(
        capsys,
        "desk-scale trends",
        ok,
        f"density {'/'.join(f'{v:.4f}' for v in dens)}, "
        f"interpolation {'/'.join(f'{v:.4f}' for v in interp)}, "
        f"low-band {'/'.join(f'{v:.4f}' for v in lfb)} vs high {'/'.join(f'{v:.4f}' for v in hfb)}, "
        f"block cost {cost['pc']:.3f}<{cost['fpd']:.3f}<{cost['cpd']:.3f} s, {dt:.0f} s",
    )
