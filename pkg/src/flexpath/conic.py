"""Thin second-order-cone programming layer over the Clarabel interior-point solver.

The waypoint and coefficient blocks assemble their subproblems as a linear
objective with linear equalities/inequalities plus second-order cones; this
module owns the translation to the solver's (A, b, cones) form so the solver
dependency stays behind one seam.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import clarabel


class ConicSolveError(RuntimeError):
    """Interior-point solve did not reach an acceptable status."""

    def __init__(self, status: str, message: str = ""):
        self.status = status
        super().__init__(message or f"conic solve failed with status {status}")


@dataclass
class SecondOrderCone:
    """||F x + g||_2 <= u . x + v  (u may be None for a constant bound)."""

    F: sp.spmatrix
    g: np.ndarray
    u: np.ndarray | None = None
    v: float = 0.0

    def __post_init__(self) -> None:
        g = np.asarray(self.g, dtype=float)
        if g.ndim != 1 or g.shape[0] != self.F.shape[0]:
            raise ValueError(
                f"shift of shape {g.shape} does not match {self.F.shape[0]} cone rows"
            )


@dataclass
class ConicProgram:
    """minimize c . x  s.t.  A_eq x = b_eq, A_ub x <= b_ub, SOC constraints."""

    c: np.ndarray
    a_eq: sp.spmatrix | None = None
    b_eq: np.ndarray | None = None
    a_ub: sp.spmatrix | None = None
    b_ub: np.ndarray | None = None
    cones: list[SecondOrderCone] = field(default_factory=list)


@dataclass
class ConicSolution:
    x: np.ndarray
    objective: float
    status: str
    iterations: int


def quadratic_budget_cone(
    w_rows: sp.spmatrix, w_shift: np.ndarray, bound_coeffs: np.ndarray, bound_const: float
) -> SecondOrderCone:
    """Encode ||W x + s||^2 <= bound_const - bound_coeffs . x as one cone.

    Standard rotated-cone folding: with w = bound - a.x, the quadratic budget
    is equivalent to ||[W x + s; (w-1)/2]|| <= (w+1)/2.
    """
    w_rows = sp.csr_matrix(w_rows)
    n = w_rows.shape[1]
    a = np.asarray(bound_coeffs, dtype=float)
    extra = sp.csr_matrix(-0.5 * a.reshape(1, n))
    f = sp.vstack([w_rows, extra], format="csr")
    g = np.concatenate([np.asarray(w_shift, dtype=float), [(bound_const - 1.0) / 2.0]])
    return SecondOrderCone(F=f, g=g, u=-0.5 * a, v=(bound_const + 1.0) / 2.0)


class ClarabelBackend:
    """Deterministic interior-point backend for ConicProgram instances."""

    def __init__(self, tol: float = 1e-8, max_iter: int = 200):
        if not 0.0 < tol <= 1e-2:
            raise ValueError(f"tol must be in (0, 1e-2], got {tol}")
        if max_iter < 1:
            raise ValueError(f"max_iter must be positive, got {max_iter}")
        self.tol = tol
        self.max_iter = max_iter

    def solve(self, prog: ConicProgram) -> ConicSolution:
        n = prog.c.shape[0]
        for name, mat, vec in (("a_eq", prog.a_eq, prog.b_eq), ("a_ub", prog.a_ub, prog.b_ub)):
            if mat is not None and (
                mat.shape[1] != n or vec is None or mat.shape[0] != np.shape(vec)[0]
            ):
                raise ValueError(f"{name} block does not match {n} variables")
        blocks = []
        rhs = []
        cones = []
        if prog.a_eq is not None and prog.a_eq.shape[0] > 0:
            blocks.append(sp.csc_matrix(prog.a_eq))
            rhs.append(np.asarray(prog.b_eq, dtype=float))
            cones.append(clarabel.ZeroConeT(prog.a_eq.shape[0]))
        if prog.a_ub is not None and prog.a_ub.shape[0] > 0:
            blocks.append(sp.csc_matrix(prog.a_ub))
            rhs.append(np.asarray(prog.b_ub, dtype=float))
            cones.append(clarabel.NonnegativeConeT(prog.a_ub.shape[0]))
        for cone in prog.cones:
            m = cone.F.shape[0]
            u = cone.u if cone.u is not None else np.zeros(n)
            top = sp.csc_matrix(-u.reshape(1, n))
            blocks.append(sp.vstack([top, sp.csc_matrix(-sp.csr_matrix(cone.F))], format="csc"))
            rhs.append(np.concatenate([[cone.v], np.asarray(cone.g, dtype=float)]))
            cones.append(clarabel.SecondOrderConeT(m + 1))
        if not blocks:
            raise ValueError("program has no constraints; nothing to solve")
        a = sp.vstack(blocks, format="csc")
        b = np.concatenate(rhs)

        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.max_iter = self.max_iter
        settings.tol_gap_abs = self.tol
        settings.tol_gap_rel = self.tol
        settings.tol_feas = self.tol
        solver = clarabel.DefaultSolver(
            sp.csc_matrix((n, n)), np.asarray(prog.c, dtype=float), a, b, cones, settings
        )
        result = solver.solve()
        status = str(result.status)
        if status == "Solved":
            mapped = "optimal"
        elif status == "AlmostSolved":
            mapped = "near_optimal"
        else:
            raise ConicSolveError(status)
        x = np.asarray(result.x, dtype=float)
        return ConicSolution(
            x=x, objective=float(result.obj_val), status=mapped, iterations=int(result.iterations)
        )


def default_backend(tol: float = 1e-8) -> ClarabelBackend:
    return ClarabelBackend(tol=tol)
