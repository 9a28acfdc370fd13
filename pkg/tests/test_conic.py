"""Cone program wrapper: analytic optima and the quadratic budget fold."""
import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from flexpath.conic import (
    ClarabelBackend,
    ConicProgram,
    ConicSolveError,
    SecondOrderCone,
    default_backend,
    quadratic_budget_cone,
)


def _solve(program):
    return default_backend().solve(program)


def test_maximize_sum_on_unit_disk():
    # max x + y subject to ||(x, y)|| <= 1 has optimum at (s, s), s = sqrt(2)/2
    cone = SecondOrderCone(F=np.eye(2), g=np.zeros(2), u=None, v=1.0)
    prog = ConicProgram(c=np.array([-1.0, -1.0]), cones=(cone,))
    sol = _solve(prog)
    s = math.sqrt(2.0) / 2.0
    assert sol.status in ("optimal", "near_optimal")
    assert np.allclose(sol.x, [s, s], atol=1e-6)
    assert sol.objective == pytest.approx(-math.sqrt(2.0), abs=1e-6)


def test_equality_pin_combines_with_cone():
    # pin x = 0.3 on the unit disk and maximize y: y* = sqrt(1 - 0.09)
    cone = SecondOrderCone(F=np.eye(2), g=np.zeros(2), u=None, v=1.0)
    prog = ConicProgram(
        c=np.array([0.0, -1.0]),
        a_eq=np.array([[1.0, 0.0]]),
        b_eq=np.array([0.3]),
        cones=(cone,),
    )
    sol = _solve(prog)
    assert sol.x[0] == pytest.approx(0.3, abs=1e-7)
    assert sol.x[1] == pytest.approx(math.sqrt(0.91), abs=1e-6)


def test_linear_inequalities_alone():
    # max x + 2y with x <= 1, y <= 2, -x <= 0, -y <= 0
    prog = ConicProgram(
        c=np.array([-1.0, -2.0]),
        a_ub=np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]),
        b_ub=np.array([1.0, 2.0, 0.0, 0.0]),
    )
    sol = _solve(prog)
    assert np.allclose(sol.x, [1.0, 2.0], atol=1e-7)


@given(
    seed=st.integers(0, 5_000),
    n=st.integers(1, 4),
    bound=st.floats(0.5, 50.0),
)
@settings(max_examples=80)
def test_quadratic_budget_cone_membership(seed, n, bound):
    # the folded cone accepts x exactly when ||Wx + s||^2 + a.x <= b
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(n, n))
    shift = rng.normal(size=n)
    a = rng.normal(size=n) * 0.1
    cone = quadratic_budget_cone(w, shift, a, bound)
    for _ in range(12):
        x = rng.normal(size=n)
        lhs = float(np.dot(cone.F @ x + cone.g, cone.F @ x + cone.g)) ** 0.5
        rhs = float((cone.u @ x if cone.u is not None else 0.0) + cone.v)
        member = lhs <= rhs
        quad = float(np.dot(w @ x + shift, w @ x + shift) + a @ x)
        assert member == (quad <= bound + 1e-9) or abs(quad - bound) < 1e-7


def test_quadratic_budget_cone_optimum():
    # max t subject to ||p - w||^2 <= 10 - t: optimum t = 10 at p = w
    w = np.array([3.0, -2.0])
    rows = np.hstack([np.eye(2), np.zeros((2, 1))])
    cone = quadratic_budget_cone(rows, -w, np.array([0.0, 0.0, 1.0]), 10.0)
    prog = ConicProgram(c=np.array([0.0, 0.0, -1.0]), cones=(cone,))
    sol = _solve(prog)
    assert sol.x[2] == pytest.approx(10.0, abs=1e-6)
    assert np.allclose(sol.x[:2], w, atol=1e-3)


def test_infeasible_program_raises():
    cone = SecondOrderCone(F=np.eye(2), g=np.zeros(2), u=None, v=1.0)
    prog = ConicProgram(
        c=np.array([-1.0, 0.0]),
        a_eq=np.array([[1.0, 0.0]]),
        b_eq=np.array([2.0]),
        cones=(cone,),
    )
    with pytest.raises(ConicSolveError) as err:
        _solve(prog)
    assert err.value.status not in ("optimal", "near_optimal")


def test_unconstrained_program_is_rejected():
    with pytest.raises(ValueError):
        _solve(ConicProgram(c=np.array([1.0, 0.0])))


def test_backend_validates_tolerance():
    with pytest.raises(ValueError):
        ClarabelBackend(tol=0.0)
    with pytest.raises(ValueError):
        ClarabelBackend(max_iter=0)


def test_cone_shape_validation():
    with pytest.raises(ValueError):
        SecondOrderCone(F=np.eye(2), g=np.zeros(3), u=None, v=1.0)
    bad = ConicProgram(
        c=np.array([1.0, 0.0]),
        a_eq=sp.csr_matrix(np.array([[1.0, 0.0, 0.0]])),
        b_eq=np.array([0.0]),
    )
    with pytest.raises(ValueError, match="a_eq"):
        _solve(bad)
