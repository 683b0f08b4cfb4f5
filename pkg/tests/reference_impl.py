"""Independent reference recursions used as oracles by the test suite.

reference_solve runs the backward induction definitionally through the
public max-of-affine operations (compose, weighted add, binary max),
one disturbance sample at a time, with none of the envelope/prefix-sum
machinery of the production solver.  It is O(T * P * A * N * m^2) and
only usable on small instances.

frozen_state_bellman solves the scalar dynamic program obtained when
the uncontrolled state never moves (sigma = 0, mu = 0, x0 = 0), which
the matrix recursion must reproduce exactly at the anchor.
"""

import numpy as np

from cswitch import (
    FunctionMatrix,
    exact_reward,
    max_bind,
    compose_linear,
    reward_matrix,
    scrap_matrix,
)


def reference_solve(model, sp, sampling, grid):
    """Definitional backward induction; returns (values, expected) arrays."""
    T = sp.horizon
    levels = model.lattice.levels
    P = levels.shape[0]
    A = model.actions.n_actions
    m = grid.m
    values = np.empty((T + 1, P, m, 2))
    expected = np.empty((T, P, m, 2))
    for p in range(P):
        values[T, p] = scrap_matrix(levels[p], sp, model.scrap_mode, m).rows
    mats = sampling.matrices
    nu = sampling.weights
    for t in range(T - 1, -1, -1):
        for p in range(P):
            acc = np.zeros((m, 2))
            for n in range(sampling.n):
                comp = compose_linear(FunctionMatrix(values[t + 1, p]), mats[n], grid)
                acc += nu[n] * comp.rows
            expected[t, p] = acc
        for p in range(P):
            best = None
            for a in range(A):
                rows = reward_matrix(t, p, a, sp, model, m).rows.copy()
                for q in range(P):
                    rows += model.alpha[p, a, q] * expected[t, q]
                cand = FunctionMatrix(rows)
                best = cand if best is None else max_bind(best, cand, grid)
            values[t, p] = best.rows
    return values, expected


def frozen_state_bellman(model, sp, z0):
    """Scalar dynamic program with the state pinned at z0 for all t.

    Valid when the disturbance maps z0 to itself.  Returns (vals, acts)
    with vals of shape (T+1, P) and greedy actions (lowest index on
    ties) of shape (T, P).
    """
    T = sp.horizon
    P = model.n_levels
    A = model.n_actions
    vals = np.empty((T + 1, P))
    acts = np.empty((T, P), dtype=int)
    for p in range(P):
        vals[T, p] = exact_reward(T, p, 0, z0, model, sp)
    for t in range(T - 1, -1, -1):
        for p in range(P):
            cand = np.array([
                exact_reward(t, p, a, z0, model, sp)
                + model.alpha[p, a] @ vals[t + 1]
                for a in range(A)
            ])
            acts[t, p] = int(np.argmax(cand))
            vals[t, p] = cand[acts[t, p]]
    return vals, acts
