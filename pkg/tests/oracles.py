"""Independent brute-force oracles used by the test suite.

Everything here recomputes expected values from definitions (sorting,
nested loops, exhaustive threshold sweeps) without touching the fast code
paths it is used to check.
"""

from __future__ import annotations

import numpy as np

from qfca.features import gaussian_blur
from qfca.transport import sorted_mismatch_oracle


def expand_histogram(weights: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Expand integer-weight histogram into its explicit value multiset."""
    return np.repeat(centers, np.asarray(weights, dtype=np.int64))


def naive_patch_histograms(idx_plane: np.ndarray, n_bins: int, t: int
                           ) -> np.ndarray:
    """Direct nested-loop window bin counting with reflect padding."""
    h, w = idx_plane.shape
    r = t // 2

    def refl(v, n):
        while v < 0 or v >= n:
            v = -v if v < 0 else 2 * n - 2 - v
        return v

    counts = np.zeros((n_bins, h, w), dtype=np.int64)
    for y in range(h):
        for x in range(w):
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    b = idx_plane[refl(y + dy, h), refl(x + dx, w)]
                    counts[b, y, x] += 1
    return counts


def _reflect_indices(n: int, r: int) -> np.ndarray:
    """Mapping from padded coordinate (length n + 2r) to source coordinate."""
    idx = np.arange(-r, n + r)
    idx = np.abs(idx)
    idx = np.where(idx >= n, 2 * n - 2 - idx, idx)
    return idx


def _row_searchsorted(table: np.ndarray, rows: np.ndarray,
                      queries: np.ndarray) -> np.ndarray:
    """Leftmost insertion index of queries[i] in the sorted row table[rows[i]]."""
    lo = np.zeros(rows.size, dtype=np.int64)
    hi = np.full(rows.size, table.shape[1], dtype=np.int64)
    while np.any(lo < hi):
        active = lo < hi
        mid = (lo + hi) // 2
        less = table[rows, np.minimum(mid, table.shape[1] - 1)] < queries
        lo = np.where(active & less, mid + 1, lo)
        hi = np.where(active & ~less, mid, hi)
    return lo


def fca_channel_scores(plane: np.ndarray, t: int, sample_budget: int
                       ) -> np.ndarray:
    """Full-precision rank-matching anomaly scores for one feature channel.

    For every window: sort the patch values, match them by rank against the
    per-rank (lower) median reference, average errors of equal values, then
    give each pixel the mean, over all windows whose (reflected) center is
    within the patch stencil, of the error its own value received there.
    """
    plane = np.asarray(plane, dtype=np.float64)
    h, w = plane.shape
    r = t // 2
    ry = _reflect_indices(h, r)
    rx = _reflect_indices(w, r)
    padded = plane[np.ix_(ry, rx)]
    wins = np.lib.stride_tricks.sliding_window_view(padded, (t, t))
    wins = wins.reshape(h * w, t * t)

    # reference: per-rank lower median over a stride-grid patch sample
    stride = 1
    while ((h + stride - 1) // stride) * ((w + stride - 1) // stride) > sample_budget:
        stride += 1
    grid = wins.reshape(h, w, t * t)[::stride, ::stride].reshape(-1, t * t)
    ranked = np.sort(grid, axis=1)
    ref_sorted = np.sort(ranked, axis=0)[(ranked.shape[0] - 1) // 2]

    ws = np.sort(wins, axis=1)
    errs = np.abs(ws - ref_sorted[None, :])

    # per-window tables of unique values and their group-mean errors
    m = h * w
    k = t * t
    uvals = np.full((m, k), np.inf)
    uerrs = np.zeros((m, k))
    for i in range(m):
        starts = np.flatnonzero(np.r_[True, ws[i, 1:] != ws[i, :-1]])
        sums = np.add.reduceat(errs[i], starts)
        counts = np.diff(np.r_[starts, k])
        nu = starts.size
        uvals[i, :nu] = ws[i, starts]
        uerrs[i, :nu] = sums / counts

    # association: average each pixel's own-value error over the stencil
    yy, xx = np.mgrid[0:h, 0:w]
    v = plane.ravel()
    acc = np.zeros(h * w)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            cy = ry[yy.ravel() + dy + r]
            cx = rx[xx.ravel() + dx + r]
            rows = cy * w + cx
            pos = _row_searchsorted(uvals, rows, v)
            hit = (pos < k) & (uvals[rows, np.minimum(pos, k - 1)] == v)
            acc += np.where(hit, uerrs[rows, np.minimum(pos, k - 1)], 0.0)
    return (acc / (t * t)).reshape(h, w)


def fca_pipeline_scores(values: np.ndarray, t: int = 9, sigma_s: float = 1.0,
                        sample_budget: int = 4096) -> np.ndarray:
    """Full-precision sorting-based pipeline over a (C, H, W) feature map."""
    per_channel = [fca_channel_scores(c, t, sample_budget) for c in values]
    agg = np.mean(per_channel, axis=0)
    return gaussian_blur(agg, sigma_s) if sigma_s > 0 else agg


def pro_bruteforce(samples, fpr_limit: float = 0.3) -> float:
    """Exhaustive-threshold PRO with trapezoidal integration to the limit."""
    from qfca.metrics import connected_components

    scores = np.concatenate([s.interior()[0].ravel() for s in samples])
    thresholds = np.unique(scores)[::-1]
    comps = []
    normals = []
    for s in samples:
        sc, mk = s.interior()
        normals.append(sc[~mk])
        labels, count = connected_components(mk)
        for lab in range(1, count + 1):
            comps.append(sc[labels == lab])
    normal = np.concatenate(normals)
    pts = [(0.0, 0.0)]
    for t in thresholds:
        pro = np.mean([np.mean(c >= t) for c in comps])
        fpr = np.mean(normal >= t) if normal.size else 0.0
        pts.append((fpr, pro))
    pts.append((1.0, 1.0))
    area = 0.0
    for (f0, p0), (f1, p1) in zip(pts[:-1], pts[1:]):
        if f1 <= f0:
            continue
        hi = min(f1, fpr_limit)
        if hi <= f0:
            break
        p_hi = p0 + (p1 - p0) * (hi - f0) / (f1 - f0)
        area += 0.5 * (p0 + p_hi) * (hi - f0)
        if f1 >= fpr_limit:
            break
    return area / fpr_limit


def f1_bruteforce(samples) -> float:
    scores = np.concatenate([s.interior()[0].ravel() for s in samples])
    labels = np.concatenate([s.interior()[1].ravel() for s in samples])
    best = 0.0
    for t in np.unique(scores):
        pred = scores >= t
        tp = np.sum(pred & labels)
        if tp == 0:
            continue
        prec = tp / pred.sum()
        rec = tp / labels.sum()
        best = max(best, 2 * prec * rec / (prec + rec))
    return float(best)


def auroc_bruteforce(scores: np.ndarray, labels: np.ndarray) -> float:
    """Pairwise positive-negative comparison count (ties count half)."""
    pos = scores[labels.astype(bool)]
    neg = scores[~labels.astype(bool)]
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return float((wins + 0.5 * ties) / (pos.size * neg.size))
