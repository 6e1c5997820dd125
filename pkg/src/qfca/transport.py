"""Two-pointer quantized transport mismatch between histograms, the sorting
oracle it must agree with, and 1-D Wasserstein utilities used in testing.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

REL_MASS_TOL = 1e-6
_EPS_FACTOR = 1e-9  # slack for float-weight comparisons, scaled by total mass


class MassError(ValueError):
    """Patch and reference histogram masses differ beyond tolerance."""


class IllConditionedError(ValueError):
    """Input too degenerate for a stable finite-difference check."""


def _validate(P, R, Q):
    P = np.asarray(P, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    if not (P.shape == R.shape == Q.shape) or P.ndim != 1:
        raise ValueError("P, R, Q must be 1-D and of equal length")
    if np.any(P < 0) or np.any(R < 0):
        raise ValueError("histogram weights must be non-negative")
    if np.any(np.diff(Q) <= 0):
        raise ValueError("bin centers must be strictly increasing")
    mp, mr = P.sum(), R.sum()
    if abs(mp - mr) > REL_MASS_TOL * max(mp, mr, 1.0):
        raise MassError(f"histogram masses differ: {mp} vs {mr}")
    return P, R, Q


def quantized_mismatch(P, R, Q, return_iterations: bool = False):
    """Per-bin mismatch scores between patch histogram P and reference R.

    Walks the two histograms with a pair of pointers, transporting
    min(P_i, R_j) mass at cost |Q_i - Q_j| per unit, then divides each
    accumulated bin error by the original bin weight (0/0 -> 0). The loop
    takes at most 2N - 1 steps. Ties in weight advance the reference
    pointer; an epsilon proportional to the total mass guards the
    comparison against float asymmetry.
    """
    P, R, Q = _validate(P, R, Q)
    n = P.size
    e = np.zeros(n, dtype=np.float64)
    p = P.copy()
    r = R.copy()
    eps = _EPS_FACTOR * max(p.sum(), 1e-300)
    i = j = 0
    iters = 0
    while i < n and j < n:
        iters += 1
        d = abs(Q[i] - Q[j])
        if p[i] < r[j] - eps:
            e[i] += p[i] * d
            r[j] -= p[i]
            i += 1
        else:
            e[i] += r[j] * d
            p[i] -= r[j]
            j += 1
    out = np.where(P > 0, e / np.where(P > 0, P, 1.0), 0.0)
    if return_iterations:
        return out, iters
    return out


@njit(cache=True)
def _mismatch_row(P, R, Q, eps, out):
    n = P.shape[0]
    mp = 0.0
    mr = 0.0
    for b in range(n):
        mp += P[b]
        mr += R[b]
        out[b] = 0.0
    if mr <= 0.0 or mp <= 0.0:
        return
    scale = mp / mr  # rescale reference to the patch mass
    rem = P[0]
    rrem = R[0] * scale
    i = 0
    j = 0
    while i < n and j < n:
        d = abs(Q[i] - Q[j])
        if rem < rrem - eps:
            out[i] += rem * d
            rrem -= rem
            i += 1
            if i < n:
                rem = P[i]
        else:
            out[i] += rrem * d
            rem -= rrem
            j += 1
            if j < n:
                rrem = R[j] * scale
    for b in range(n):
        if P[b] > 0.0:
            out[b] /= P[b]
        else:
            out[b] = 0.0


@njit(parallel=True, cache=True)
def mismatch_batch(Pb, R, Q, out):
    """Row-parallel Alg.-1 kernel: Pb is (M, N), R and Q are (N,), out (M, N).

    Each row's reference copy is rescaled to that row's total mass, so
    callers may pass raw (possibly truncated) patch histograms.
    """
    m = Pb.shape[0]
    mr = 0.0
    for b in range(R.shape[0]):
        mr += R[b]
    for k in prange(m):
        mp = 0.0
        for b in range(Pb.shape[1]):
            mp += Pb[k, b]
        _mismatch_row(Pb[k], R, Q, _EPS_FACTOR * max(mp, 1e-300), out[k])


def sorted_mismatch_oracle(x, y):
    """Per-element transport errors by rank matching of two equal-length
    vectors, with errors of equal x-values replaced by their group mean.

    Returned in the original order of ``x``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D of equal length")
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = np.sort(y, kind="stable")
    err = np.abs(xs - ys)
    # group-average errors over runs of equal x-values
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    sums = np.add.reduceat(err, starts)
    counts = np.diff(np.r_[starts, err.size])
    avg = np.repeat(sums / counts, counts)
    out = np.empty_like(avg)
    out[order] = avg
    return out


def wasserstein1_histogram(P, R, Q) -> float:
    """Total 1-D W1 transport cost between two histograms on centers Q.

    Closed form: sum over gaps of |cumP - cumR| * (Q_{i+1} - Q_i). Masses
    are not normalized, so this equals the total cost sum_i E_i * P_i of
    :func:`quantized_mismatch`.
    """
    P, R, Q = _validate(P, R, Q)
    cp = np.cumsum(P)[:-1]
    cr = np.cumsum(R)[:-1]
    return float(np.sum(np.abs(cp - cr) * np.diff(Q)))


def _w2sq(x, y):
    xs = np.sort(x)
    ys = np.sort(y)
    return float(np.sum((xs - ys) ** 2))


def w2sq_gradient_check(x, y, h: float = 1e-4) -> float:
    """Max deviation between the finite-difference gradient magnitude of the
    squared 2-Wasserstein distance and twice the rank-matching error.

    Requires all entries of ``x`` separated by more than 10*h so the sorted
    matching is stable under the perturbation.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size > 1 and np.min(np.diff(np.sort(x))) <= 10 * h:
        raise IllConditionedError("entries of x too close for stable matching")
    oracle = sorted_mismatch_oracle(x, y)
    worst = 0.0
    for k in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        fd = abs((_w2sq(xp, y) - _w2sq(xm, y)) / (2 * h))
        worst = max(worst, abs(fd - 2.0 * oracle[k]))
    return worst
