"""Linear state dynamics, disturbance discretization, and path simulation.

The continuous state follows Z_{t+1} = W_{t+1} Z_t in the embedding
Z = (1, X) with X an AR(1) component: X_{t+1} = mu + sigma * eps + phi * X_t.
The random disturbance matrix is therefore

    W = [[1,            0  ],
         [mu + sigma*q, phi]]

with q standard normal.  Expectations over W are approximated by a
finite weighted sample on equidistant quantiles, and Monte Carlo paths
(with nested subsimulations for the diagnostics) are generated with
antithetic pairing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

__all__ = [
    "Ar1Params",
    "DisturbanceSampling",
    "SeasonalPrice",
    "PathSet",
    "build_disturbance_sampling",
    "price",
    "make_case_study_price",
    "simulate_paths",
]


@dataclass(frozen=True)
class Ar1Params:
    """Drift, innovation scale, and mean-reversion coefficient."""

    mu: float = 0.0
    sigma: float = 0.5
    phi: float = 0.9

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if not 0.0 <= self.phi <= 1.0:
            raise ValueError(f"phi must lie in [0, 1], got {self.phi}")

    def disturbance(self, innovation: float) -> np.ndarray:
        """The 2x2 state transition matrix for one innovation draw."""
        return np.array([[1.0, 0.0], [self.mu + self.sigma * innovation, self.phi]])


@dataclass(frozen=True)
class DisturbanceSampling:
    """Weighted finite sample {(W(n), nu(n))} of the disturbance matrix.

    Only the (2, 1) entry of W is random; `innovations` stores it per
    sample, sorted ascending.  `matrices` materializes the full 2x2
    matrices on demand.
    """

    innovations: np.ndarray     # shape (N,), entries mu + sigma * q_n
    weights: np.ndarray         # shape (N,), sums to 1
    phi: float

    def __post_init__(self):
        innov = np.asarray(self.innovations, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if innov.shape != w.shape or innov.ndim != 1:
            raise ValueError("innovations and weights must be equal-length vectors")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
        for name, arr in (("innovations", innov), ("weights", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.innovations.shape[0]

    @property
    def matrices(self) -> np.ndarray:
        """All sampled matrices, shape (N, 2, 2)."""
        out = np.zeros((self.n, 2, 2))
        out[:, 0, 0] = 1.0
        out[:, 1, 0] = self.innovations
        out[:, 1, 1] = self.phi
        return out

    def matrix(self, n: int) -> np.ndarray:
        return np.array([[1.0, 0.0], [self.innovations[n], self.phi]])

    def mean_matrix(self) -> np.ndarray:
        return np.array(
            [[1.0, 0.0], [float(self.weights @ self.innovations), self.phi]]
        )


def build_disturbance_sampling(params: Ar1Params, N: int) -> DisturbanceSampling:
    """Discretize the innovation on N equidistant quantile levels.

    Sample n (1-based) sits at the standard normal quantile of level
    n / (N + 1); all weights are 1 / N.  The end levels 0 and 1 are
    excluded, which slightly understates tail mass but keeps every
    sample finite.
    """
    if N < 2:
        raise ValueError(f"need at least 2 quantile samples, got {N}")
    q = stats.norm.ppf(np.arange(1, N + 1) / (N + 1))
    return DisturbanceSampling(
        innovations=params.mu + params.sigma * q,
        weights=np.full(N, 1.0 / N),
        phi=params.phi,
    )


@dataclass(frozen=True)
class SeasonalPrice:
    """Affine price map f(t, x) = u_t + v_t * x with time-indexed coefficients."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        if u.shape != v.shape or u.ndim != 1:
            raise ValueError("u and v must be equal-length vectors")
        u.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def horizon(self) -> int:
        """Largest valid time index T (arrays cover t = 0 ... T)."""
        return self.u.shape[0] - 1


def price(sp: SeasonalPrice, t: int, z2: float) -> float:
    """Evaluate u_t + v_t * z2."""
    if not 0 <= t <= sp.horizon:
        raise ValueError(f"time index {t} outside 0..{sp.horizon}")
    return float(sp.u[t] + sp.v[t] * z2)


def make_case_study_price(
    T: int,
    u_base: float = 10.0,
    u_amp: float = 1.0,
    v_base: float = 1.0,
    v_amp: float = 0.5,
    period: float = 48.0,
    phase: float = 1.5 * np.pi,
) -> SeasonalPrice:
    """Daily-cycle coefficients u_t = u_base + u_amp*cos(2 pi t/period + phase),
    v_t = v_base + v_amp*sin(2 pi t/period + phase), for t = 0 ... T."""
    if T < 1:
        raise ValueError("horizon must be at least 1")
    t = np.arange(T + 1)
    arg = 2.0 * np.pi * t / period + phase
    return SeasonalPrice(u=u_base + u_amp * np.cos(arg), v=v_base + v_amp * np.sin(arg))


@dataclass(frozen=True)
class PathSet:
    """Primary Monte Carlo paths plus nested subsimulation draws.

    Attributes
    ----------
    states : ndarray, shape (K, T+1, 2)
        Trajectories z^k_t; first component identically 1.
    primary : ndarray, shape (K, T)
        Innovation entries w^{0,k}; primary[k, t] maps z^k_t to z^k_{t+1}.
    nested : ndarray, shape (K, T, I)
        Subsimulation innovations w^{i,k} branching off z^k_t.
    seed : int
        Master seed the draws were derived from.
    """

    states: np.ndarray
    primary: np.ndarray
    nested: np.ndarray
    seed: int
    phi: float

    def __post_init__(self):
        for name in ("states", "primary", "nested"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        K, T = self.primary.shape
        if self.states.shape != (K, T + 1, 2):
            raise ValueError(
                f"states shape {self.states.shape} inconsistent with primary {self.primary.shape}"
            )
        if self.nested.shape[:2] != (K, T):
            raise ValueError(
                f"nested shape {self.nested.shape} inconsistent with primary {self.primary.shape}"
            )

    @property
    def n_paths(self) -> int:
        return self.primary.shape[0]

    @property
    def horizon(self) -> int:
        return self.primary.shape[1]

    @property
    def n_nested(self) -> int:
        return self.nested.shape[2]


def _antithetic_normal(rng: np.random.Generator, shape: tuple, axis: int) -> np.ndarray:
    """Standard normal draws where the second half along `axis` mirrors the first.

    With an odd extent the final slice is an independent draw, so exact
    cancellation of the sample mean holds only for even extents.
    """
    n = shape[axis]
    half_shape = list(shape)
    half_shape[axis] = n // 2
    eps = rng.standard_normal(tuple(half_shape))
    parts = [eps, -eps]
    if n % 2:
        odd_shape = list(shape)
        odd_shape[axis] = 1
        parts.append(rng.standard_normal(tuple(odd_shape)))
    return np.concatenate(parts, axis=axis)


def simulate_paths(
    params: Ar1Params,
    z0,
    T: int,
    K: int,
    I: int,
    seed: int,
) -> PathSet:
    """Generate K primary trajectories from z0 with I nested draws per step.

    Antithetic pairing follows the layout used throughout: path k + K//2
    negates the innovations of path k, and nested draws interleave
    (eps, -eps) along the subsimulation axis.  Everything is derived
    from `seed` through independent substreams, so results are
    reproducible and independent of generation order.
    """
    if K < 1 or I < 1:
        raise ValueError("need at least one path and one subsimulation")
    if T < 1:
        raise ValueError("horizon must be at least 1")
    z0 = np.asarray(z0, dtype=np.float64)
    if z0.shape != (2,) or z0[0] != 1.0:
        raise ValueError("z0 must be a 2-vector with first component 1")

    ss_primary, ss_nested = np.random.SeedSequence(seed).spawn(2)

    eps0 = _antithetic_normal(np.random.default_rng(ss_primary), (K, T), axis=0)
    primary = params.mu + params.sigma * eps0

    # interleave (eps, -eps) along the subsimulation axis
    half = I // 2
    rng_n = np.random.default_rng(ss_nested)
    eta = rng_n.standard_normal((K, T, half))
    nested = np.empty((K, T, I))
    nested[:, :, 0 : 2 * half : 2] = eta
    nested[:, :, 1 : 2 * half : 2] = -eta
    if I % 2:
        nested[:, :, I - 1] = rng_n.standard_normal((K, T))
    nested = params.mu + params.sigma * nested

    states = np.empty((K, T + 1, 2))
    states[:, :, 0] = 1.0
    states[:, 0, 1] = z0[1]
    for t in range(T):
        states[:, t + 1, 1] = primary[:, t] + params.phi * states[:, t, 1]

    return PathSet(states=states, primary=primary, nested=nested, seed=seed, phi=params.phi)
