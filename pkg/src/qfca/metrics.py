"""Segmentation/classification metrics with the usual benchmark
post-processing: border exclusion, pooled per-class pixels, PRO up to a
false-positive-rate limit, optimal-threshold F1 and rank-based AUROC.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

PRO_FPR_LIMIT = 0.3
PRO_MAX_THRESHOLDS = 500

_STRUCT8 = np.ones((3, 3), dtype=int)


class UndefinedMetricError(ValueError):
    """The metric is undefined for the given label distribution."""


@dataclass(frozen=True)
class EvalSample:
    scores: np.ndarray  # (H, W) float
    mask: np.ndarray  # (H, W) bool
    image_label: bool
    border: int = 0

    def __post_init__(self):
        if self.scores.shape != self.mask.shape:
            raise ValueError("scores and mask shapes differ")
        h, w = self.scores.shape
        if self.border >= min(h, w) / 2:
            raise ValueError("border exclusion leaves no pixels")

    def interior(self) -> tuple[np.ndarray, np.ndarray]:
        b = self.border
        if b == 0:
            return self.scores, self.mask
        return self.scores[b:-b, b:-b], self.mask[b:-b, b:-b]


def _rank_auroc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mann-Whitney AUROC with average ranks for ties."""
    pos = int(labels.sum())
    neg = labels.size - pos
    if pos == 0 or neg == 0:
        raise UndefinedMetricError("AUROC needs both classes")
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    ranks = np.empty(s.size, dtype=np.float64)
    # average rank within runs of equal scores
    starts = np.flatnonzero(np.r_[True, s[1:] != s[:-1]])
    ends = np.r_[starts[1:], s.size]
    avg = (starts + ends - 1) / 2.0 + 1.0
    ranks[order] = np.repeat(avg, ends - starts)
    rank_sum = ranks[labels].sum()
    return float((rank_sum - pos * (pos + 1) / 2) / (pos * neg))


def _pooled(samples: list[EvalSample]) -> tuple[np.ndarray, np.ndarray]:
    scores, labels = [], []
    for s in samples:
        sc, mk = s.interior()
        scores.append(sc.ravel())
        labels.append(mk.ravel())
    return np.concatenate(scores), np.concatenate(labels)


def auroc_pixel(samples: list[EvalSample]) -> float:
    scores, labels = _pooled(samples)
    return _rank_auroc(scores, labels.astype(bool))


def connected_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connectivity labeling in raster order; labels start at 1."""
    labels, count = ndimage.label(np.asarray(mask, dtype=bool),
                                  structure=_STRUCT8)
    return labels, int(count)


def _pro_thresholds(scores: np.ndarray) -> np.ndarray:
    """Distinct scores at up to PRO_MAX_THRESHOLDS evenly spaced quantiles,
    descending."""
    qs = np.linspace(0.0, 1.0, PRO_MAX_THRESHOLDS)
    thr = np.unique(np.quantile(scores, qs))
    return thr[::-1]


def _pro_curve(samples: list[EvalSample], thresholds: np.ndarray
               ) -> tuple[np.ndarray, np.ndarray]:
    """(fpr, pro) values at the given descending thresholds.

    A prediction at threshold t is ``score >= t``. PRO is the mean
    per-component overlap pooled across the class; FPR is global over
    normal pixels.
    """
    comp_scores: list[np.ndarray] = []
    normal_scores: list[np.ndarray] = []
    for s in samples:
        sc, mk = s.interior()
        normal_scores.append(sc[~mk])
        labels, count = connected_components(mk)
        for lab in range(1, count + 1):
            comp_scores.append(np.sort(sc[labels == lab]))
    if not comp_scores:
        raise UndefinedMetricError("PRO needs at least one ground-truth region")
    normal = np.sort(np.concatenate(normal_scores))
    n_norm = normal.size
    pro = np.zeros(thresholds.size)
    for cs in comp_scores:
        # fraction of the component at or above each threshold
        pro += (cs.size - np.searchsorted(cs, thresholds, side="left")) / cs.size
    pro /= len(comp_scores)
    if n_norm == 0:
        fpr = np.zeros(thresholds.size)
    else:
        fpr = (n_norm - np.searchsorted(normal, thresholds, side="left")) / n_norm
    return fpr, pro


def _integrate_to_limit(fpr: np.ndarray, pro: np.ndarray,
                        limit: float) -> float:
    """Trapezoidal area of the PRO-vs-FPR curve on [0, limit], normalized.

    The curve is anchored at (0, 0) and (1, 1) and linearly interpolated at
    the limit.
    """
    f = np.r_[0.0, fpr, 1.0]
    p = np.r_[0.0, pro, 1.0]
    # make fpr non-decreasing (thresholds descending already guarantee it)
    area = 0.0
    for i in range(1, f.size):
        f0, f1 = f[i - 1], f[i]
        p0, p1 = p[i - 1], p[i]
        if f1 <= f0:
            continue
        hi = min(f1, limit)
        if hi <= f0:
            break
        p_hi = p0 + (p1 - p0) * (hi - f0) / (f1 - f0)
        area += 0.5 * (p0 + p_hi) * (hi - f0)
        if f1 >= limit:
            break
    return area / limit


def pro_at_fpr(samples: list[EvalSample], fpr_limit: float = PRO_FPR_LIMIT,
               thresholds: np.ndarray | None = None) -> float:
    """Area under the per-region-overlap curve up to ``fpr_limit``."""
    scores, _ = _pooled(samples)
    if thresholds is None:
        thresholds = _pro_thresholds(scores)
    fpr, pro = _pro_curve(samples, thresholds)
    return _integrate_to_limit(fpr, pro, fpr_limit)


def f1_optimal(samples: list[EvalSample]) -> float:
    """Best F1 over all thresholds of the pooled pixel scores."""
    scores, labels = _pooled(samples)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetricError("F1 needs at least one positive pixel")
    order = np.argsort(scores, kind="stable")[::-1]
    sorted_scores = scores[order]
    tp = np.cumsum(labels[order].astype(np.int64))
    k = np.arange(1, scores.size + 1)
    # candidate thresholds at the last element of each equal-score run
    last = np.r_[sorted_scores[1:] != sorted_scores[:-1], True]
    f1 = 2.0 * tp[last] / (k[last] + n_pos)
    return float(f1.max())


def auroc_image(samples: list[EvalSample]) -> float:
    """AUROC over per-image maximum scores (border excluded)."""
    scores = np.array([s.interior()[0].max() for s in samples])
    labels = np.array([s.image_label for s in samples], dtype=bool)
    return _rank_auroc(scores, labels)


@dataclass
class MetricReport:
    per_class: dict[str, dict] = field(default_factory=dict)

    def add_class(self, name: str, samples: list[EvalSample]) -> dict:
        row: dict[str, float | int | None] = {"n_images": len(samples)}
        for key, fn in (("pro", pro_at_fpr), ("auroc_s", auroc_pixel),
                        ("f1", f1_optimal), ("auroc_c", auroc_image)):
            try:
                row[key] = fn(samples)
            except UndefinedMetricError:
                row[key] = None
        self.per_class[name] = row
        return row

    def to_dict(self) -> dict:
        out = dict(self.per_class)
        keys = ("pro", "auroc_s", "f1", "auroc_c")
        mean_row: dict[str, float | None] = {}
        for k in keys:
            vals = [r[k] for r in self.per_class.values() if r.get(k) is not None]
            mean_row[k] = float(np.mean(vals)) if vals else None
        mean_row["n_images"] = sum(r["n_images"] for r in self.per_class.values())
        out["mean"] = mean_row
        return out
