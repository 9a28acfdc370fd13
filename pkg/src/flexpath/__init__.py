"""Flexible path discretization, path compression, and max-min harvesting design.

The toolkit splits a flight period into piecewise-linear segments under an
approximation-error budget, compresses designable waypoints onto small basis
families, and solves the max-min data-harvesting co-design by block-coordinate
descent with convex inner steps.
"""

__version__ = "0.1.0"

from .model import (
    Position3,
    Scenario,
    PiecewiseTrajectory,
    Schedule,
    segment_velocities,
    spectral_efficiency,
    validate_trajectory,
)
from .discretize import (
    SegmentBounds,
    TdGrid,
    FpdPath,
    derive_segment_bounds,
    max_segment_length,
    rate_error_bound,
    min_segment_count,
    make_td_grid,
    expand_fpd,
    finite_sum_rates,
    integrate_rates,
    compress_constant_velocity_runs,
)
from .basis import (
    BasisMatrix,
    PathCoeffs,
    CompressedBasis,
    fourier_basis,
    shifted_sine_basis,
    custom_basis,
    decompose,
    reconstruct,
    compress,
)
from .solver import (
    TdScheme,
    CpdScheme,
    FpdScheme,
    FpdPcScheme,
    SolverConfig,
    ProblemSpec,
    Solution,
    initialize,
    solve_schedule,
    solve_durations,
    sca_waypoint_step,
    sca_coeff_step,
    bcd_solve,
)
from .bench import RunConfig, RunRecord, run, sweep, emit
