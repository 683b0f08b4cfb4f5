"""Compiled kernels for the backward induction and envelope evaluation.

Every value-function matrix here is grid-canonical: row i is the affine
functional (intercept, slope) supporting the function at grid point
(1, y_i).  Because the disturbance matrix has the structure
W = [[1, 0], [w, phi]], the product of a row (c1, c2) with W is the row
(c1 + c2*w, c2*phi), and its value at (1, y) is c1 + c2*(w + phi*y).
Row rearrangement over the disturbance sample therefore reduces to
querying the upper envelope of the lines x -> c1 + c2*x at the shifted
points w_n + phi*y_i, which these kernels exploit: the envelope is built
once per matrix and each grid point accumulates whole envelope segments
through prefix sums instead of touching all N samples.

Determinism: parallel loops range only over independent battery levels,
every reduction runs in a fixed sequential order, and no fastmath is
enabled, so results are bit-identical for any thread count.
"""

import numpy as np
from numba import njit, prange

__all__ = ["expected_step", "max_step", "build_envelope", "envelope_values"]


@njit(cache=True)
def _hull_from_sorted(c1s, c2s, h1, h2, bk):
    """Upper envelope of lines x -> c1s[j] + c2s[j]*x, slopes sorted ascending.

    Writes the surviving lines into h1/h2 and the segment boundaries into
    bk (segment j is active on [bk[j-1], bk[j])).  Returns the number of
    segments.  Pop decisions use cross-multiplied comparisons so they do
    not depend on division rounding; equal-slope lines keep the largest
    intercept, first occurrence winning on exact ties.
    """
    k = c1s.shape[0]
    size = 0
    for j in range(k):
        a1 = c1s[j]
        a2 = c2s[j]
        if size > 0 and a2 == h2[size - 1]:
            if a1 <= h1[size - 1]:
                continue
            size -= 1
        while size >= 2:
            # pop the top line if the new one already dominates it at the
            # break between the two topmost stack lines
            den_new = a2 - h2[size - 2]
            den_old = h2[size - 1] - h2[size - 2]
            if (h1[size - 2] - a1) * den_old <= (h1[size - 2] - h1[size - 1]) * den_new:
                size -= 1
            else:
                break
        if size >= 1:
            bk[size - 1] = (h1[size - 1] - a1) / (a2 - h2[size - 1])
        h1[size] = a1
        h2[size] = a2
        size += 1
    return size


@njit(cache=True)
def _sorted_lines(c1, c2, c1s, c2s):
    # stable sort by slope keeps the within-tie order reproducible
    order = np.argsort(c2, kind="mergesort")
    for j in range(c1.shape[0]):
        c1s[j] = c1[order[j]]
        c2s[j] = c2[order[j]]


@njit(cache=True, parallel=True)
def expected_step(V_all, w, pnu_hi, pnu_lo, pnw_hi, pnw_lo, phi, y, out):
    """Disturbance-weighted sum of rearranged compositions, per battery level.

    Parameters
    ----------
    V_all : (P, m, 2) grid-canonical value matrices at time t+1.
    w : (N,) innovation entries of the disturbance sample, ascending.
    pnu_hi, pnu_lo : (N+1,) split prefix sums of the sample weights.
    pnw_hi, pnw_lo : (N+1,) split prefix sums of weight * innovation.
    phi : mean-reversion coefficient (the (2, 2) entry of W).
    y : (m,) second grid coordinates.
    out : (P, m, 2) output, the expected-value matrices.

    The split (hi, lo) prefix sums carry extended-precision partial sums
    in two float64 words; segment totals are differences of both words,
    and the per-row accumulation over segments is compensated, keeping
    the weighted sum reproducible to near machine precision at N = 10000.
    """
    P, m, _ = V_all.shape
    N = w.shape[0]
    for p in prange(P):
        c1s = np.empty(m)
        c2s = np.empty(m)
        _sorted_lines(V_all[p, :, 0].copy(), V_all[p, :, 1].copy(), c1s, c2s)
        h1 = np.empty(m)
        h2 = np.empty(m)
        bk = np.empty(m)
        size = _hull_from_sorted(c1s, c2s, h1, h2, bk)
        nb = size - 1
        for i in range(m):
            shift = phi * y[i]
            jlo = np.searchsorted(bk[:nb], w[0] + shift, side="right")
            jhi = np.searchsorted(bk[:nb], w[N - 1] + shift, side="right")
            acc1 = 0.0
            err1 = 0.0
            acc2 = 0.0
            err2 = 0.0
            nprev = 0
            for j in range(jlo, jhi + 1):
                if j == jhi:
                    nxt = N
                else:
                    nxt = np.searchsorted(w, bk[j] - shift, side="left")
                    if nxt < nprev:
                        nxt = nprev
                if nxt > nprev:
                    snu = (pnu_hi[nxt] - pnu_hi[nprev]) + (pnu_lo[nxt] - pnu_lo[nprev])
                    snw = (pnw_hi[nxt] - pnw_hi[nprev]) + (pnw_lo[nxt] - pnw_lo[nprev])
                    term = snu * h1[j] + snw * h2[j]
                    tmp = term - err1
                    s = acc1 + tmp
                    err1 = (s - acc1) - tmp
                    acc1 = s
                    term = snu * h2[j]
                    tmp = term - err2
                    s = acc2 + tmp
                    err2 = (s - acc2) - tmp
                    acc2 = s
                nprev = nxt
            out[p, i, 0] = acc1
            out[p, i, 1] = phi * acc2


@njit(cache=True, parallel=True)
def max_step(VE_all, alpha, r_int, r_slope, y, out):
    """Action maximization: out[p] represents max_a (reward + continuation).

    r_int, r_slope : (P, A) affine reward coefficients at the current time.
    alpha : (P, A, P) controlled transition probabilities.
    Row i of the result is the supporting row of the best action at grid
    point i; ties go to the lowest action index.
    """
    P, m, _ = VE_all.shape
    A = r_int.shape[1]
    for p in prange(P):
        best = np.full(m, -np.inf)
        b1 = np.empty(m)
        b2 = np.empty(m)
        c1 = np.empty(m)
        c2 = np.empty(m)
        for a in range(A):
            for i in range(m):
                c1[i] = r_int[p, a]
                c2[i] = r_slope[p, a]
            for q in range(P):
                aq = alpha[p, a, q]
                for i in range(m):
                    c1[i] += aq * VE_all[q, i, 0]
                    c2[i] += aq * VE_all[q, i, 1]
            for i in range(m):
                v = c1[i] + c2[i] * y[i]
                if v > best[i]:
                    best[i] = v
                    b1[i] = c1[i]
                    b2[i] = c2[i]
        for i in range(m):
            out[p, i, 0] = b1[i]
            out[p, i, 1] = b2[i]


@njit(cache=True)
def _build_envelope_impl(c1, c2):
    m = c1.shape[0]
    c1s = np.empty(m)
    c2s = np.empty(m)
    _sorted_lines(c1, c2, c1s, c2s)
    h1 = np.empty(m)
    h2 = np.empty(m)
    bk = np.empty(m)
    size = _hull_from_sorted(c1s, c2s, h1, h2, bk)
    return h1[:size].copy(), h2[:size].copy(), bk[: size - 1].copy()


def build_envelope(rows: np.ndarray):
    """Upper envelope of the affine rows of a function matrix.

    Returns (intercepts, slopes, breaks); evaluating the represented
    function at x picks the segment found by a right-bisect of x into
    breaks.  Used for bulk evaluation of stored value functions.
    """
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    return _build_envelope_impl(rows[:, 0], rows[:, 1])


def envelope_values(env, x: np.ndarray) -> np.ndarray:
    """Evaluate an envelope from build_envelope at the query points x."""
    h1, h2, bk = env
    idx = np.searchsorted(bk, x, side="right")
    return h1[idx] + h2[idx] * x
