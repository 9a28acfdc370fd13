"""Path compression: waypoint matrices as combinations of basis paths.

A path with L+1 waypoints per spatial dimension is a row vector q in
R^{L+1}; stacking dimensions gives the waypoint matrix Q (rows = dims).
A basis matrix P holds L+1 basis paths as rows, so Q = C @ P expresses the
path by its coefficient matrix C. Keeping K < L+1 basis rows compresses the
design space from (L+1) to K coefficients per dimension.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DecompositionError(ValueError):
    """The basis is too ill-conditioned to invert in double precision."""


class CompressionError(ValueError):
    """The selected basis rows cannot support a least-squares fit."""


COND_LIMIT = 1e12

_KINDS = ("fourier", "shifted-sine", "custom")


@dataclass(frozen=True, eq=False)
class BasisMatrix:
    """(L+1) x (L+1) basis matrix; row l is the l-th basis path."""

    entries: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
            raise ValueError(f"basis must be square with at least 2 rows, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("basis entries must be finite")
        if self.kind not in _KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}; expected one of {_KINDS}")
        a.flags.writeable = False
        object.__setattr__(self, "entries", a)

    @property
    def order(self) -> int:
        """L: one less than the number of basis paths."""
        return self.entries.shape[0] - 1


def fourier_basis(order: int) -> BasisMatrix:
    """Sine-family basis: row 0 is all ones, row l >= 1 is sin(pi*l*lt/(2L)).

    Row l crosses zero l-1 times on the open grid, so row index orders the
    paths from smooth to oscillatory. Exactly nonsingular for every order,
    but the float64 condition number grows geometrically (~1e12 at L=15),
    which is what the decompose gate protects against.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    grid = np.arange(order + 1)
    rows = np.arange(1, order + 1)
    p = np.ones((order + 1, order + 1))
    p[1:, :] = np.sin(np.pi * rows[:, None] * grid[None, :] / (2.0 * order))
    return BasisMatrix(p, "fourier")


def shifted_sine_basis(order: int) -> BasisMatrix:
    """Windowed-sine basis: row l is sin(2*pi*(lt - l)/L) outside a dead band.

    Row l is nonzero only on grid columns lt in [0, b1(l)] union [l, b2(l)]
    with b1 = max(0, l - L/2 - 1) and b2 = min(L/2 + l, L); order must be
    even and >= 2. All rows share one shape shifted along the grid, so the
    first K rows span paths supported near the start of the period.
    """
    if order < 2 or order % 2 != 0:
        raise ValueError("shifted-sine basis needs an even order >= 2")
    half = order // 2
    p = np.zeros((order + 1, order + 1))
    for l in range(order + 1):
        b1 = max(0, l - half - 1)
        b2 = min(half + l, order)
        cols = [lt for lt in range(order + 1) if lt <= b1 or l <= lt <= b2]
        for lt in cols:
            p[l, lt] = math.sin(2.0 * math.pi * (lt - l) / order)
    return BasisMatrix(p, "shifted-sine")


def custom_basis(entries: np.ndarray) -> BasisMatrix:
    return BasisMatrix(entries, "custom")


@dataclass(frozen=True, eq=False)
class PathCoeffs:
    """Coefficient matrix C with Q = C @ P; rows are spatial dimensions."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2:
            raise ValueError(f"coefficients must be 2-D, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("coefficients must be finite")
        a.flags.writeable = False
        object.__setattr__(self, "entries", a)


def decompose(waypoint_matrix: np.ndarray, basis: BasisMatrix) -> PathCoeffs:
    """Coefficients C solving Q = C @ P for a full basis.

    Requires cond(P) < 1e12; beyond that double precision cannot recover C
    and a DecompositionError names the offending basis. One iterative
    refinement pass keeps the roundtrip residual near machine level inside
    the gate.
    """
    q = np.asarray(waypoint_matrix, dtype=float)
    p = basis.entries
    if q.ndim != 2 or q.shape[1] != p.shape[1]:
        raise ValueError(
            f"waypoint matrix of shape {q.shape} does not match a basis of order {basis.order}"
        )
    cond = np.linalg.cond(p)
    if not cond < COND_LIMIT:
        raise DecompositionError(
            f"{basis.kind} basis of order {basis.order} has condition number "
            f"{cond:.3e} (limit {COND_LIMIT:.0e}); decomposition would be meaningless"
        )
    c = np.linalg.solve(p.T, q.T).T
    residual = q - c @ p
    c = c + np.linalg.solve(p.T, residual.T).T
    return PathCoeffs(c)


def reconstruct(coeffs: np.ndarray | PathCoeffs, basis_rows: np.ndarray) -> np.ndarray:
    """Waypoint matrix C @ rows for coefficient matrix C and (K, L+1) rows."""
    c = coeffs.entries if isinstance(coeffs, PathCoeffs) else np.asarray(coeffs, dtype=float)
    rows = np.asarray(basis_rows, dtype=float)
    if c.ndim != 2 or rows.ndim != 2 or c.shape[1] != rows.shape[0]:
        raise ValueError(f"cannot combine coefficients {c.shape} with rows {rows.shape}")
    return c @ rows


SELECTIONS = ("lfb", "hfb", "first-k")


def select_rows(order: int, keep: int, selection: str) -> tuple[int, ...]:
    """Row indices kept by a selection rule.

    "lfb" and "first-k" keep rows 0..K-1 (for the sine family these are the
    lowest-frequency paths; for the windowed family the earliest shifts);
    "hfb" keeps the last K rows (highest frequency / latest shifts).
    """
    if not 1 <= keep <= order + 1:
        raise ValueError(f"keep must be in [1, {order + 1}], got {keep}")
    if selection in ("lfb", "first-k"):
        return tuple(range(keep))
    if selection == "hfb":
        return tuple(range(order + 1 - keep, order + 1))
    raise ValueError(f"unknown selection {selection!r}; expected one of {SELECTIONS}")


@dataclass(frozen=True, eq=False)
class CompressedBasis:
    """K selected basis rows plus fitted coefficients for one path."""

    rows: np.ndarray
    selected_indices: tuple[int, ...]
    coeffs: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        rows = np.array(self.rows, dtype=float)
        coeffs = np.array(self.coeffs, dtype=float)
        if rows.ndim != 2 or coeffs.ndim != 2 or coeffs.shape[1] != rows.shape[0]:
            raise ValueError(
                f"coefficients {coeffs.shape} do not match {rows.shape[0]} selected rows"
            )
        if len(self.selected_indices) != rows.shape[0]:
            raise ValueError("selected_indices must name every kept row")
        rows.flags.writeable = False
        coeffs.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "selected_indices", tuple(int(i) for i in self.selected_indices))

    @property
    def keep(self) -> int:
        return self.rows.shape[0]

    @property
    def compression_ratio(self) -> float:
        """K/(L+1): fraction of design variables kept."""
        return self.keep / self.rows.shape[1]

    def reconstruct(self) -> np.ndarray:
        return self.coeffs @ self.rows


def compress(
    waypoint_matrix: np.ndarray,
    basis: BasisMatrix,
    keep: int,
    selection: str = "lfb",
    fit: str = "lstsq",
) -> CompressedBasis:
    """Project a path onto K selected basis rows.

    fit="lstsq" (default) least-squares-fits the kept rows directly and only
    needs those rows to be numerically full rank; fit="truncate" decomposes
    on the full basis and keeps the selected coefficient columns (ablation
    mode; inherits decompose's conditioning gate).
    """
    q = np.asarray(waypoint_matrix, dtype=float)
    if q.ndim != 2 or q.shape[1] != basis.order + 1:
        raise ValueError(
            f"waypoint matrix of shape {q.shape} does not match a basis of order {basis.order}"
        )
    idx = select_rows(basis.order, keep, selection)
    rows = basis.entries[list(idx)]
    sv = np.linalg.svd(rows, compute_uv=False)
    rank_floor = sv[0] * max(rows.shape) * np.finfo(float).eps
    if sv[-1] <= rank_floor:
        raise CompressionError(
            f"the {keep} selected rows of the {basis.kind} basis (order {basis.order}) "
            f"are numerically rank-deficient (smallest/largest singular value "
            f"{sv[-1]:.3e}/{sv[0]:.3e})"
        )
    if fit == "lstsq":
        c = np.linalg.lstsq(rows.T, q.T, rcond=None)[0].T
        residual = q - c @ rows
        c = c + np.linalg.lstsq(rows.T, residual.T, rcond=None)[0].T
    elif fit == "truncate":
        c = decompose(q, basis).entries[:, list(idx)]
    else:
        raise ValueError(f"unknown fit mode {fit!r}; expected 'lstsq' or 'truncate'")
    return CompressedBasis(rows=rows, selected_indices=idx, coeffs=c, kind=basis.kind)
