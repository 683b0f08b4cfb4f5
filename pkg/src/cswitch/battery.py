"""Battery storage and forward trading model.

A retailer buys energy forward with a safety margin l(a) above predicted
demand.  The battery absorbs the imbalance between the margin and the
realized demand deviation (normal, sd varsigma): surplus charges it,
deficit discharges it.  Energy spilling over a full battery is sold at
the low grid price, energy missing below an empty one is bought at the
high grid price.  The battery level moves on a finite lattice; the
controlled transition probabilities and the expected excess and shortage
volumes have normal-CDF closed forms, collected in a BatteryModel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .pwc import FunctionMatrix, affine_matrix
from .stochastic import SeasonalPrice

__all__ = [
    "BatteryLattice",
    "ActionSet",
    "DemandModel",
    "GridPrices",
    "BatteryModel",
    "build_battery_model",
    "transition_probabilities",
    "expected_excess",
    "expected_shortage",
    "reward_matrix",
    "scrap_matrix",
    "exact_reward",
]

SCRAP_MODES = ("sell", "zero")


@dataclass(frozen=True)
class BatteryLattice:
    """Storage levels from p_min to p_max in steps of `step` (MWh)."""

    p_min: float
    p_max: float
    step: float

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError(f"lattice step must be positive, got {self.step}")
        span = self.p_max - self.p_min
        n = span / self.step
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise ValueError(
                f"p_max - p_min = {span} must be a positive multiple of step {self.step}"
            )

    @property
    def levels(self) -> np.ndarray:
        n = int(round((self.p_max - self.p_min) / self.step))
        return self.p_min + self.step * np.arange(n + 1)

    @property
    def n_levels(self) -> int:
        return int(round((self.p_max - self.p_min) / self.step)) + 1


@dataclass(frozen=True)
class ActionSet:
    """Safety margins l(a), one per action."""

    margins: tuple

    def __post_init__(self):
        margins = tuple(float(x) for x in self.margins)
        if len(margins) == 0:
            raise ValueError("need at least one action")
        object.__setattr__(self, "margins", margins)

    @property
    def n_actions(self) -> int:
        return len(self.margins)


@dataclass(frozen=True)
class DemandModel:
    """Demand deviation is centered normal with standard deviation varsigma."""

    varsigma: float

    def __post_init__(self):
        if self.varsigma <= 0:
            raise ValueError(f"varsigma must be positive, got {self.varsigma}")


@dataclass(frozen=True)
class GridPrices:
    """Deterministic sell (low) and buy (high) grid prices."""

    pi_low: float
    pi_high: float

    def __post_init__(self):
        if not 0 <= self.pi_low < self.pi_high:
            raise ValueError(
                f"prices must satisfy 0 <= pi_low < pi_high, got {self.pi_low}, {self.pi_high}"
            )


def transition_probabilities(
    lattice: BatteryLattice, level: float, margin: float, varsigma: float
) -> np.ndarray:
    """Distribution of the next battery level for one (level, margin) pair.

    The post-absorption level level + margin - eps is normal with mean
    level + margin and sd varsigma; interior lattice points receive the
    band of half a step around them and the boundary points absorb the
    tails.  Returns a vector over the lattice that sums to 1.
    """
    levels = lattice.levels
    mean = level + margin
    out = np.empty(levels.shape[0])
    half = lattice.step / 2.0
    out[0] = stats.norm.cdf(levels[0] + half, loc=mean, scale=varsigma)
    out[-1] = 1.0 - stats.norm.cdf(levels[-1] - half, loc=mean, scale=varsigma)
    inner = levels[1:-1]
    out[1:-1] = stats.norm.cdf(inner + half, loc=mean, scale=varsigma) - stats.norm.cdf(
        inner - half, loc=mean, scale=varsigma
    )
    return out


def expected_excess(
    lattice: BatteryLattice, level: float, margin: float, varsigma: float
) -> float:
    """Expected energy spilling over a full battery, E[(X - p_max)+ beyond the top band].

    Closed form of the integral of (x - p_max) over x > p_max + step/2
    under the normal post-absorption distribution.
    """
    c = lattice.p_max + lattice.step / 2.0
    m = level + margin
    s = varsigma
    return s / math.sqrt(2.0 * math.pi) * math.exp(-((c - m) ** 2) / (2.0 * s * s)) + (
        m - lattice.p_max
    ) / 2.0 * (1.0 - math.erf((c - m) / math.sqrt(2.0 * s * s)))


def expected_shortage(
    lattice: BatteryLattice, level: float, margin: float, varsigma: float
) -> float:
    """Expected energy missing below an empty battery, mirror of expected_excess."""
    c = lattice.p_min - lattice.step / 2.0
    m = level + margin
    s = varsigma
    return s / math.sqrt(2.0 * math.pi) * math.exp(-((c - m) ** 2) / (2.0 * s * s)) + (
        lattice.p_min - m
    ) / 2.0 * (math.erf((c - m) / math.sqrt(2.0 * s * s)) + 1.0)


@dataclass(frozen=True)
class BatteryModel:
    """Immutable model bundle: lattice, actions, demand, prices, and tables.

    alpha[p, a, q] is the probability of moving from lattice index p to
    index q under action a; excess and shortage are the expected spill
    and deficit volumes per (p, a).  scrap_mode selects the terminal
    reward: 'sell' liquidates the stored energy at the terminal price,
    'zero' discards it.
    """

    lattice: BatteryLattice
    actions: ActionSet
    demand: DemandModel
    prices: GridPrices
    alpha: np.ndarray
    excess: np.ndarray
    shortage: np.ndarray
    scrap_mode: str

    def __post_init__(self):
        if self.scrap_mode not in SCRAP_MODES:
            raise ValueError(f"scrap_mode must be one of {SCRAP_MODES}, got {self.scrap_mode!r}")
        P = self.lattice.n_levels
        A = self.actions.n_actions
        for name, shape in (("alpha", (P, A, P)), ("excess", (P, A)), ("shortage", (P, A))):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        sums = self.alpha.sum(axis=2)
        if not np.all(np.abs(sums - 1.0) <= 1e-10):
            raise ValueError("every transition row must sum to 1 within 1e-10")
        if np.any(self.excess < 0) or np.any(self.shortage < 0):
            raise ValueError("excess and shortage must be nonnegative")

    @property
    def n_levels(self) -> int:
        return self.lattice.n_levels

    @property
    def n_actions(self) -> int:
        return self.actions.n_actions


def build_battery_model(
    lattice: BatteryLattice,
    actions: ActionSet,
    demand: DemandModel,
    prices: GridPrices,
    scrap_mode: str = "sell",
) -> BatteryModel:
    """Precompute the transition tensor and the excess/shortage tables."""
    levels = lattice.levels
    P = levels.shape[0]
    A = actions.n_actions
    alpha = np.empty((P, A, P))
    excess = np.empty((P, A))
    shortage = np.empty((P, A))
    for p in range(P):
        for a in range(A):
            margin = actions.margins[a]
            alpha[p, a] = transition_probabilities(lattice, levels[p], margin, demand.varsigma)
            excess[p, a] = expected_excess(lattice, levels[p], margin, demand.varsigma)
            shortage[p, a] = expected_shortage(lattice, levels[p], margin, demand.varsigma)
    return BatteryModel(
        lattice=lattice,
        actions=actions,
        demand=demand,
        prices=prices,
        alpha=alpha,
        excess=excess,
        shortage=shortage,
        scrap_mode=scrap_mode,
    )


def reward_matrix(
    t: int, p: int, a: int, sp: SeasonalPrice, model: BatteryModel, m: int = 1
) -> FunctionMatrix:
    """Running reward at time t for lattice index p and action index a.

    The reward is affine in the state: buying margin l(a) at the forward
    price costs l(a) * f(t, z2), the expected shortage is bought at the
    high grid price and the expected excess sold at the low one.  An
    affine function is its own subgradient envelope, so the matrix is the
    single coefficient row, replicated m times if a grid-aligned shape is
    wanted.
    """
    if not 0 <= t < sp.horizon:
        raise ValueError(f"reward defined for 0 <= t < {sp.horizon}, got {t}")
    margin = model.actions.margins[a]
    intercept = (
        -margin * sp.u[t]
        - model.shortage[p, a] * model.prices.pi_high
        + model.excess[p, a] * model.prices.pi_low
    )
    slope = -margin * sp.v[t]
    return affine_matrix([intercept, slope], m)


def scrap_matrix(level: float, sp: SeasonalPrice, mode: str, m: int = 1) -> FunctionMatrix:
    """Terminal reward for a physical storage level.

    'sell' liquidates the level at the terminal price, 'zero' yields the
    zero function.
    """
    if mode not in SCRAP_MODES:
        raise ValueError(f"scrap mode must be one of {SCRAP_MODES}, got {mode!r}")
    T = sp.horizon
    if mode == "sell":
        return affine_matrix([level * sp.u[T], level * sp.v[T]], m)
    return affine_matrix([0.0, 0.0], m)


def exact_reward(
    t: int, p: int, a: int, z, model: BatteryModel, sp: SeasonalPrice
) -> float:
    """Pointwise reward r_t(p, z, a); at t = horizon dispatches to the scrap value.

    Kept free of any grid machinery so the Monte Carlo diagnostics can
    evaluate rewards along simulated states directly.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (2,):
        raise ValueError(f"state must be a 2-vector, got shape {z.shape}")
    T = sp.horizon
    if t == T:
        level = model.lattice.levels[p]
        if model.scrap_mode == "sell":
            return float(level * (sp.u[T] + sp.v[T] * z[1]))
        return 0.0
    margin = model.actions.margins[a]
    return float(
        -margin * (sp.u[t] + sp.v[t] * z[1])
        - model.shortage[p, a] * model.prices.pi_high
        + model.excess[p, a] * model.prices.pi_low
    )
