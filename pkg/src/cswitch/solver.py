"""Backward induction for the convex switching problem.

The recursion keeps, for every time and battery level, the grid-canonical
matrix of the double-modified value function: the expected step rearranges
each composition with a sampled disturbance and takes the weighted sum,
the maximization step binds the per-action candidates and rearranges
again.  Both steps run in compiled kernels that exploit the (1, x) state
embedding; see _kernels for the envelope reformulation.

Value functions are stored densely over (time, level), so evaluation,
policy extraction, and the Monte Carlo diagnostics can query any epoch
without re-solving.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .battery import BatteryModel
from .pwc import Grid
from .stochastic import DisturbanceSampling, SeasonalPrice

__all__ = ["SolveResult", "solve", "value_at", "expected_value_at", "policy"]


@dataclass(frozen=True)
class SolveResult:
    """Dense value-function representation produced by solve().

    Attributes
    ----------
    values : ndarray, shape (T+1, P, m, 2)
        values[t, p] is the grid-canonical matrix of v_t(p, .).
    expected : ndarray, shape (T, P, m, 2)
        expected[t-1, p] is the matrix of the expected value function
        v^E_t(p, .), defined for t = 1 ... T.
    model, sp, grid
        The inputs the recursion was run with.
    """

    values: np.ndarray
    expected: np.ndarray
    model: BatteryModel
    sp: SeasonalPrice
    grid: Grid

    def __post_init__(self):
        for name in ("values", "expected"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def horizon(self) -> int:
        return self.values.shape[0] - 1


def _dd_prefix(v: np.ndarray):
    """Prefix sums of v split into two float64 words (hi + lo).

    The cumulative sums are formed in extended precision; hi holds the
    rounded value and lo the residual, so differences of prefix sums
    recover segment totals to well below one double ulp.
    """
    c = np.zeros(v.shape[0] + 1, dtype=np.longdouble)
    np.cumsum(v.astype(np.longdouble), out=c[1:])
    hi = c.astype(np.float64)
    lo = (c - hi.astype(np.longdouble)).astype(np.float64)
    return hi, lo


def _scrap_rows(model: BatteryModel, sp: SeasonalPrice, m: int) -> np.ndarray:
    """Terminal matrices, shape (P, m, 2): affine scrap replicated per grid row."""
    levels = model.lattice.levels
    P = levels.shape[0]
    out = np.zeros((P, m, 2))
    if model.scrap_mode == "sell":
        T = sp.horizon
        out[:, :, 0] = (levels * sp.u[T])[:, None]
        out[:, :, 1] = (levels * sp.v[T])[:, None]
    return out


def solve(
    model: BatteryModel,
    sp: SeasonalPrice,
    sampling: DisturbanceSampling,
    grid: Grid,
) -> SolveResult:
    """Run the full backward induction.

    The horizon is taken from the seasonal price table (T = len(u) - 1);
    rewards apply at t = 0 ... T-1 and the scrap value at T.  The grid
    must use the (1, y) embedding.  Complexity is O(T * P * (m log N +
    A * P * m)) after an O(N log N) setup, independent of N in the hot
    loop thanks to the envelope/prefix-sum formulation.
    """
    if not np.all(grid.points[:, 0] == 1.0):
        raise ValueError("solver requires a grid in the (1, y) state embedding")
    T = sp.horizon
    if T < 1:
        raise ValueError("horizon must be at least 1")
    levels = model.lattice.levels
    margins = np.asarray(model.actions.margins)
    P = levels.shape[0]
    A = margins.shape[0]
    m = grid.m
    y = np.ascontiguousarray(grid.points[:, 1])

    # sample sorted by innovation; weights follow their sample
    innov = sampling.innovations
    order = np.argsort(innov, kind="stable")
    w = np.ascontiguousarray(innov[order])
    nu = np.ascontiguousarray(sampling.weights[order])
    pnu_hi, pnu_lo = _dd_prefix(nu)
    pnw_hi, pnw_lo = _dd_prefix(nu * w)
    phi = sampling.phi

    # affine reward coefficients, shape (T, P, A)
    r_int = (
        -margins[None, None, :] * sp.u[:T, None, None]
        - model.shortage[None, :, :] * model.prices.pi_high
        + model.excess[None, :, :] * model.prices.pi_low
    )
    r_slope = np.broadcast_to(
        -margins[None, None, :] * sp.v[:T, None, None], r_int.shape
    )

    values = np.empty((T + 1, P, m, 2))
    expected = np.empty((T, P, m, 2))
    values[T] = _scrap_rows(model, sp, m)
    alpha = np.ascontiguousarray(model.alpha)
    for t in range(T - 1, -1, -1):
        _kernels.expected_step(
            values[t + 1], w, pnu_hi, pnu_lo, pnw_hi, pnw_lo, phi, y, expected[t]
        )
        _kernels.max_step(
            expected[t],
            alpha,
            np.ascontiguousarray(r_int[t]),
            np.ascontiguousarray(r_slope[t]),
            y,
            values[t],
        )
    return SolveResult(values=values, expected=expected, model=model, sp=sp, grid=grid)


def _check_indices(result: SolveResult, t: int, p: int, t_min: int = 0):
    if not t_min <= t <= result.horizon:
        raise IndexError(f"time index {t} outside {t_min}..{result.horizon}")
    if not 0 <= p < result.model.n_levels:
        raise IndexError(f"level index {p} outside 0..{result.model.n_levels - 1}")


def value_at(result: SolveResult, t: int, p: int, z) -> float:
    """Evaluate v_t(p, z) as the exact maximum over the stored rows."""
    _check_indices(result, t, p)
    z = np.asarray(z, dtype=np.float64)
    return float(np.max(result.values[t, p] @ z))


def expected_value_at(result: SolveResult, t: int, p: int, z) -> float:
    """Evaluate v^E_t(p, z), defined for t = 1 ... T, exact row maximum."""
    _check_indices(result, t, p, t_min=1)
    z = np.asarray(z, dtype=np.float64)
    return float(np.max(result.expected[t - 1, p] @ z))


def _nearest_grid_index(result: SolveResult, z2: float) -> int:
    y = result.grid.points[:, 1]
    return int(np.argmin(np.abs(y - z2)))


def policy(result: SolveResult, t: int, p: int, z, nn: bool = False) -> int:
    """Approximately optimal action index at (t, p, z).

    Maximizes reward plus the transition-weighted expected value of the
    next epoch; ties resolve to the lowest action index.  With nn=True
    the expected values are read from the single row anchored at the
    nearest grid point instead of the exact row maximum (faster off-grid,
    identical on the grid).
    """
    from .battery import exact_reward

    _check_indices(result, t, p)
    if t >= result.horizon:
        raise IndexError(f"policy defined for t < {result.horizon}")
    z = np.asarray(z, dtype=np.float64)
    model = result.model
    A = model.n_actions
    P = model.n_levels
    if nn:
        i = _nearest_grid_index(result, z[1])
        ev = result.expected[t, :, i, :] @ z
    else:
        ev = np.max(result.expected[t] @ z, axis=1)
    best_a = 0
    best_val = -np.inf
    for a in range(A):
        val = exact_reward(t, p, a, z, model, result.sp)
        for q in range(P):
            val += model.alpha[p, a, q] * ev[q]
        if val > best_val:
            best_val = val
            best_a = a
    return best_a
