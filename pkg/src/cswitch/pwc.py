"""Max-of-affine calculus for piecewise-linear convex functions.

A convex function f is represented by a matrix F, one affine functional
per row, through the relation f(z) = max(Fz).  On a fixed grid G of
anchor points, the subgradient envelope (the maximum of tangents taken
at every grid point) is a piecewise-linear under-approximation of f that
is exact on G.  The row-rearrangement operator maps any representing
matrix to the grid-canonical one whose i-th row attains the maximum at
the i-th grid point.

In this canonical form the Bellman recursion closes under three
operations: addition, pointwise maximum, and composition with a linear
map of the state.  Each is implemented here as a pure function on
immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "Grid",
    "FunctionMatrix",
    "segment_grid",
    "affine_matrix",
    "evaluate",
    "row_rearrange",
    "subgradient_envelope",
    "add",
    "max_bind",
    "compose_linear",
]


def _as_readonly(arr, dtype=np.float64) -> np.ndarray:
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Grid:
    """Finite ordered set of subgradient anchor points g^1 ... g^m in R^d.

    Parameters
    ----------
    points : array_like, shape (m, d)
        Anchor points, one per row.  At least two distinct points are
        required.  For the linear state embedding used by the battery
        case study every point has first component exactly 1.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = _as_readonly(self.points)
        if pts.ndim != 2:
            raise ValueError(f"grid points must be a 2-d array, got shape {pts.shape}")
        if pts.shape[0] < 2:
            raise ValueError("a grid needs at least 2 points")
        if len(np.unique(pts, axis=0)) != pts.shape[0]:
            raise ValueError("grid points must be distinct")
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class FunctionMatrix:
    """Matrix representative F of a convex function via f(z) = max(Fz).

    Each row is one affine functional in the linear state embedding.
    """

    rows: np.ndarray

    def __post_init__(self):
        rows = _as_readonly(self.rows)
        if rows.ndim != 2:
            raise ValueError(f"function matrix must be 2-d, got shape {rows.shape}")
        if rows.shape[0] < 1:
            raise ValueError("function matrix needs at least one row")
        object.__setattr__(self, "rows", rows)

    @property
    def k(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def __call__(self, z) -> float:
        return evaluate(self, z)


def segment_grid(count: int, lo: float, hi: float) -> Grid:
    """Grid of `count` points (1, y) with y equally spaced on [lo, hi]."""
    if count < 2:
        raise ValueError("segment grid needs at least 2 points")
    y = np.linspace(lo, hi, count)
    return Grid(np.column_stack([np.ones(count), y]))


def affine_matrix(coeffs, m: int) -> FunctionMatrix:
    """Representative of an affine function: one row replicated m times.

    The subgradient envelope of an affine function is the function
    itself, so its grid-canonical matrix repeats the coefficient row at
    every anchor point.
    """
    row = np.asarray(coeffs, dtype=np.float64)
    if row.ndim != 1:
        raise ValueError("affine coefficients must be a flat vector")
    return FunctionMatrix(np.tile(row, (m, 1)))


def _check_columns(F: FunctionMatrix, d: int, what: str):
    if F.d != d:
        raise ValueError(f"column count {F.d} does not match {what} dimension {d}")


def evaluate(F: FunctionMatrix, z) -> float:
    """Evaluate f(z) = max(Fz)."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (F.d,):
        raise ValueError(f"state vector has shape {z.shape}, expected ({F.d},)")
    return float(np.max(F.rows @ z))


def row_rearrange(F: FunctionMatrix, G: Grid) -> FunctionMatrix:
    """Grid-canonical representative: row i is the row of F attaining max(F g^i).

    Ties are broken by the lowest row index, so the result is independent
    of any evaluation order.
    """
    _check_columns(F, G.d, "grid")
    values = G.points @ F.rows.T            # (m, k) values of every row at every anchor
    choice = np.argmax(values, axis=1)      # first maximizer = lowest row index
    return FunctionMatrix(F.rows[choice])


def subgradient_envelope(
    f: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    G: Grid,
) -> FunctionMatrix:
    """Matrix of tangents of a convex function f taken at every grid point.

    Row i is the affine functional z -> f(g^i) + <grad(g^i), z - g^i>,
    written in the embedding with first state component pinned to 1 (the
    constant term is absorbed into the first coefficient).  The result
    under-approximates f everywhere and matches it on G.

    Parameters
    ----------
    f : callable
        The convex function, mapping a point of R^d to a float.
    grad : callable
        Returns a subgradient of f at the given point, shape (d,).
    G : Grid
        Anchor points; every point must have first component 1.
    """
    pts = G.points
    if not np.all(pts[:, 0] == 1.0):
        raise ValueError("subgradient envelope requires grid points with first component 1")
    rows = np.empty((G.m, G.d))
    for i, g in enumerate(pts):
        s = np.asarray(grad(g), dtype=np.float64)
        if s.shape != (G.d,):
            raise ValueError(f"subgradient at grid point {i} has shape {s.shape}, expected ({G.d},)")
        rows[i] = s
        rows[i, 0] += f(g) - s @ g          # value matching at the anchor
    return FunctionMatrix(rows)


def add(F1: FunctionMatrix, F2: FunctionMatrix) -> FunctionMatrix:
    """Row-aligned sum of two grid-rearranged matrices."""
    if F1.rows.shape != F2.rows.shape:
        raise ValueError(
            f"row-aligned sum needs equal shapes, got {F1.rows.shape} and {F2.rows.shape}"
        )
    return FunctionMatrix(F1.rows + F2.rows)


def max_bind(F1: FunctionMatrix, F2: FunctionMatrix, G: Grid) -> FunctionMatrix:
    """Grid-canonical representative of the pointwise maximum f1 v f2.

    Binds the rows of both matrices (rows of F1 first, preserving the
    tie-break order) and rearranges on the grid.
    """
    if F1.d != F2.d:
        raise ValueError(f"column counts differ: {F1.d} and {F2.d}")
    stacked = FunctionMatrix(np.vstack([F1.rows, F2.rows]))
    return row_rearrange(stacked, G)


def compose_linear(F: FunctionMatrix, W, G: Grid) -> FunctionMatrix:
    """Grid-canonical representative of z -> f(Wz), i.e. rearranged F W."""
    W = np.asarray(W, dtype=np.float64)
    if W.shape != (F.d, F.d):
        raise ValueError(f"linear map has shape {W.shape}, expected ({F.d}, {F.d})")
    return row_rearrange(FunctionMatrix(F.rows @ W), G)
