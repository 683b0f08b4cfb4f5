"""Primal-dual Monte Carlo bounds for the solved switching problem.

Given the value functions from the backward induction and a set of
simulated paths with nested subsimulations, a martingale increment is
formed per path, step, level, and action: the transition-weighted gap
between the subsimulation average of tomorrow's value and its realized
value.  Adding these zero-mean corrections inside a pathwise backward
maximization yields an upper bound estimate; accumulating them along the
actions chosen by the candidate policy yields an unbiased estimate of
that policy's value, hence a lower bound on the optimum.  Means and
standard errors over paths are reported per starting level.

All value and expected-value queries evaluate the stored matrices
exactly (row maximum), via upper envelopes plus binary search so the
nested simulation stays cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _kernels
from .battery import BatteryModel
from .solver import SolveResult, solve
from .stochastic import Ar1Params, PathSet, simulate_paths

__all__ = [
    "DiagnosticsReport",
    "PolicySimulation",
    "SweepError",
    "martingale_increments",
    "primal_dual",
    "sweep",
    "simulate_policy",
]


@dataclass(frozen=True)
class DiagnosticsReport:
    """Lower/upper bound statistics per starting battery level.

    lower_paths and upper_paths keep the raw pathwise time-0 bounds
    (shape (P, K)) so consumers can inspect the full distributions.
    """

    levels: np.ndarray
    lower_mean: np.ndarray
    lower_se: np.ndarray
    upper_mean: np.ndarray
    upper_se: np.ndarray
    n_paths: int
    n_nested: int
    seed: int
    lower_paths: np.ndarray
    upper_paths: np.ndarray

    def __post_init__(self):
        if np.any(self.lower_mean > self.upper_mean + 1e-9):
            raise ValueError("lower bound means must not exceed upper bound means")
        if np.any(self.lower_se < 0) or np.any(self.upper_se < 0):
            raise ValueError("standard errors must be nonnegative")


class SweepError(Exception):
    """A sweep member failed; the message identifies the configuration."""


def _reward_tables(result: SolveResult):
    """Affine reward coefficients (T, P, A) from the model tables."""
    model, sp = result.model, result.sp
    T = sp.horizon
    margins = np.asarray(model.actions.margins)
    r_int = (
        -margins[None, None, :] * sp.u[:T, None, None]
        - model.shortage[None, :, :] * model.prices.pi_high
        + model.excess[None, :, :] * model.prices.pi_low
    )
    r_slope = np.broadcast_to(
        -margins[None, None, :] * sp.v[:T, None, None], r_int.shape
    )
    return r_int, r_slope


def _terminal_values(result: SolveResult, x_T: np.ndarray) -> np.ndarray:
    """Scrap rewards per (level, path), shape (P, K)."""
    model, sp = result.model, result.sp
    levels = model.lattice.levels
    if model.scrap_mode == "sell":
        T = sp.horizon
        return levels[:, None] * (sp.u[T] + sp.v[T] * x_T)[None, :]
    return np.zeros((levels.shape[0], x_T.shape[0]))


def _value_envelopes(mats: np.ndarray):
    """One evaluation envelope per level from matrices of shape (P, m, 2)."""
    return [_kernels.build_envelope(mats[q]) for q in range(mats.shape[0])]


def _check_paths(result: SolveResult, paths: PathSet):
    if paths.horizon != result.horizon:
        raise ValueError(
            f"paths cover {paths.horizon} steps but the solution horizon is {result.horizon}"
        )


def _step_increments(
    alpha: np.ndarray, value_envs, paths: PathSet, t: int
) -> np.ndarray:
    """Martingale increments at step t -> t+1, shape (P, A, K).

    For each next-level q the subsimulation states are w + phi * x_t and
    the realized state is x_{t+1}; the increment contracts the per-level
    gap with the transition probabilities.
    """
    x_t = paths.states[:, t, 1]
    x_next = paths.states[:, t + 1, 1]
    K, I = paths.n_paths, paths.n_nested
    xs = (paths.nested[:, t, :] + paths.phi * x_t[:, None]).ravel()
    P = alpha.shape[0]
    diff = np.empty((P, K))
    for q in range(P):
        sub_mean = _kernels.envelope_values(value_envs[q], xs).reshape(K, I).mean(axis=1)
        diff[q] = sub_mean - _kernels.envelope_values(value_envs[q], x_next)
    return np.einsum("paq,qk->pak", alpha, diff, optimize=False)


def martingale_increments(
    result: SolveResult, paths: PathSet, model: BatteryModel | None = None
) -> np.ndarray:
    """Full increment table, shape (K, T, P, A); entry [k, t] corrects step t -> t+1.

    Zero-mean over paths by construction: the subsimulation draws are
    independent copies of the disturbance that generated x_{t+1}.
    """
    model = result.model if model is None else model
    _check_paths(result, paths)
    K, T = paths.n_paths, paths.horizon
    P, A = model.n_levels, model.n_actions
    out = np.empty((K, T, P, A))
    for t in range(T):
        envs = _value_envelopes(result.values[t + 1])
        out[:, t] = np.moveaxis(_step_increments(model.alpha, envs, paths, t), 2, 0)
    return out


def primal_dual(
    result: SolveResult,
    paths: PathSet,
    model: BatteryModel | None = None,
    increments: bool = True,
    nn: bool = False,
) -> DiagnosticsReport:
    """Pathwise backward recursions for the lower and upper bounds.

    The upper recursion maximizes reward + increment + transition-weighted
    continuation over actions; the lower recursion follows the candidate
    policy (argmax of reward plus expected-value continuation, lowest
    action index on ties).  Both bounds for all starting levels come from
    one pass over each path.  With increments=False the corrections are
    dropped, leaving a plain forward estimate of the policy value as the
    lower bound (the upper bound is then loose).  With nn=True the policy
    evaluates expected values through the row anchored at the nearest
    grid point instead of the exact row maximum.
    """
    model = result.model if model is None else model
    _check_paths(result, paths)
    K, T = paths.n_paths, paths.horizon
    P, A = model.n_levels, model.n_actions
    alpha = model.alpha
    r_int, r_slope = _reward_tables(result)
    x = paths.states[:, :, 1]
    y = result.grid.points[:, 1]
    mid = (y[1:] + y[:-1]) / 2.0

    vbar = _terminal_values(result, x[:, T])
    vlow = vbar.copy()
    for t in range(T - 1, -1, -1):
        if increments:
            envs = _value_envelopes(result.values[t + 1])
            inc = _step_increments(alpha, envs, paths, t)
        else:
            inc = 0.0
        # candidate policy: expected-value continuation at the current state
        x_t = x[:, t]
        if nn:
            idx = np.searchsorted(mid, x_t, side="left")
            ve_vals = np.einsum(
                "qkd,kd->qk", result.expected[t][:, idx, :], paths.states[:, t, :], optimize=False
            )
        else:
            exp_envs = _value_envelopes(result.expected[t])
            ve_vals = np.empty((P, K))
            for q in range(P):
                ve_vals[q] = _kernels.envelope_values(exp_envs[q], x_t)
        rv = r_int[t][:, :, None] + r_slope[t][:, :, None] * x_t[None, None, :]
        cont_pol = np.einsum("paq,qk->pak", alpha, ve_vals, optimize=False)
        act = np.argmax(rv + cont_pol, axis=1)  # (P, K), lowest index on ties

        cont_up = np.einsum("paq,qk->pak", alpha, vbar, optimize=False)
        vbar = np.max(rv + inc + cont_up, axis=1)
        cont_lo = np.einsum("paq,qk->pak", alpha, vlow, optimize=False)
        cand_lo = rv + inc + cont_lo
        vlow = np.take_along_axis(cand_lo, act[:, None, :], axis=1)[:, 0, :]

    return _make_report(result, paths, vlow, vbar)


def _se(samples: np.ndarray) -> np.ndarray:
    K = samples.shape[1]
    if K < 2:
        return np.zeros(samples.shape[0])
    return np.std(samples, axis=1, ddof=1) / np.sqrt(K)


def _make_report(result, paths, vlow, vbar) -> DiagnosticsReport:
    return DiagnosticsReport(
        levels=result.model.lattice.levels,
        lower_mean=vlow.mean(axis=1),
        lower_se=_se(vlow),
        upper_mean=vbar.mean(axis=1),
        upper_se=_se(vbar),
        n_paths=paths.n_paths,
        n_nested=paths.n_nested,
        seed=paths.seed,
        lower_paths=vlow,
        upper_paths=vbar,
    )


def sweep(configs: Iterable) -> list:
    """Solve and diagnose every configuration; abort on the first failure.

    Returns a list of (config, DiagnosticsReport) in input order.  Any
    member failure raises SweepError naming the offending configuration.
    """
    from .config import build_problem, describe_config

    out = []
    for cfg in configs:
        try:
            prob = build_problem(cfg)
            result = solve(prob.model, prob.sp, prob.sampling, prob.grid)
            paths = simulate_paths(
                prob.params, prob.z0, prob.T, cfg.n_paths, cfg.n_subsims, cfg.seed
            )
            report = primal_dual(result, paths)
        except Exception as e:
            raise SweepError(f"sweep member failed ({describe_config(cfg)}): {e}") from e
        out.append((cfg, report))
    return out


@dataclass(frozen=True)
class PolicySimulation:
    """Forward simulation of the candidate policy.

    cum_rewards includes the scrap value; level_idx[k, t] is the lattice
    index at time t (T+1 entries per scenario) and action_idx[k, t] the
    action taken at t (T entries).
    """

    cum_rewards: np.ndarray
    level_idx: np.ndarray
    action_idx: np.ndarray
    states: np.ndarray
    seed: int
    start_level_index: int


def simulate_policy(
    result: SolveResult,
    params: Ar1Params,
    z0,
    n_scenarios: int,
    seed: int,
    start_level_index: int = 0,
    nn: bool = False,
) -> PolicySimulation:
    """Run the policy forward on fresh scenarios, sampling battery moves.

    Price paths use antithetic innovation pairing; the battery level is
    sampled from the controlled transition row of the chosen action at
    every step.  Deterministic given the seed.
    """
    model, sp = result.model, result.sp
    T = result.horizon
    P, A = model.n_levels, model.n_actions
    if not 0 <= start_level_index < P:
        raise ValueError(f"start level index {start_level_index} outside 0..{P - 1}")
    z0 = np.asarray(z0, dtype=np.float64)
    r_int, r_slope = _reward_tables(result)
    y = result.grid.points[:, 1]
    mid = (y[1:] + y[:-1]) / 2.0

    ss_innov, ss_level = np.random.SeedSequence(seed).spawn(2)
    from .stochastic import _antithetic_normal

    eps = _antithetic_normal(np.random.default_rng(ss_innov), (n_scenarios, T), axis=0)
    innov = params.mu + params.sigma * eps
    x = np.empty((n_scenarios, T + 1))
    x[:, 0] = z0[1]
    for t in range(T):
        x[:, t + 1] = innov[:, t] + params.phi * x[:, t]
    u = np.random.default_rng(ss_level).random((n_scenarios, T))

    cum_alpha = np.cumsum(model.alpha, axis=2)
    scen = np.arange(n_scenarios)
    lvl = np.full(n_scenarios, start_level_index, dtype=np.int64)
    level_idx = np.empty((n_scenarios, T + 1), dtype=np.int16)
    action_idx = np.empty((n_scenarios, T), dtype=np.int16)
    level_idx[:, 0] = lvl
    rewards = np.zeros(n_scenarios)
    for t in range(T):
        x_t = x[:, t]
        if nn:
            gi = np.searchsorted(mid, x_t, side="left")
            rows = result.expected[t][:, gi, :]          # (P, n, 2)
            ve_vals = rows[:, :, 0] + rows[:, :, 1] * x_t[None, :]
        else:
            exp_envs = _value_envelopes(result.expected[t])
            ve_vals = np.empty((P, n_scenarios))
            for q in range(P):
                ve_vals[q] = _kernels.envelope_values(exp_envs[q], x_t)
        # candidates only for the levels actually occupied
        alpha_rows = model.alpha[lvl]                    # (n, A, P)
        cont = (alpha_rows * ve_vals.T[:, None, :]).sum(axis=2)
        rv = r_int[t][lvl, :] + r_slope[t][lvl, :] * x_t[:, None]
        act = np.argmax(rv + cont, axis=1)
        action_idx[:, t] = act
        rewards += rv[scen, act]
        cum_rows = cum_alpha[lvl, act]                   # (n, P)
        nxt = (cum_rows <= u[:, t][:, None]).sum(axis=1)
        lvl = np.minimum(nxt, P - 1)
        level_idx[:, t + 1] = lvl
    if model.scrap_mode == "sell":
        T_idx = sp.horizon
        rewards += model.lattice.levels[lvl] * (sp.u[T_idx] + sp.v[T_idx] * x[:, T])
    return PolicySimulation(
        cum_rewards=rewards,
        level_idx=level_idx,
        action_idx=action_idx,
        states=x,
        seed=seed,
        start_level_index=start_level_index,
    )
