"""Per-channel quantization, sliding-window patch histograms via box
counting, and global reference selection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pooling import box_average_stack, pad_plane

REFERENCE_MODES = ("median-quan", "mean-quan", "quan-median", "quan-mean")


@dataclass(frozen=True)
class Quantizer:
    """Equally-spaced bins per channel over [lo, hi]."""

    lo: np.ndarray  # (C,)
    hi: np.ndarray  # (C,)
    n_bins: int
    degenerate: np.ndarray  # (C,) bool, hi == lo

    @property
    def n_channels(self) -> int:
        return self.lo.size

    def centers(self, c: int) -> np.ndarray:
        """Bin centers Q_i = lo + (i - 1/2) * (hi - lo) / N for channel c.

        Degenerate channels get a synthetic unit-width ladder so downstream
        code always sees strictly increasing centers; their errors are
        forced to zero anyway.
        """
        lo, hi = float(self.lo[c]), float(self.hi[c])
        width = (hi - lo) / self.n_bins if hi > lo else 1.0
        return lo + (np.arange(self.n_bins) + 0.5) * width


@dataclass(frozen=True)
class BinIndexMap:
    indices: np.ndarray  # (C, H, W) int32 in [0, N)
    n_bins: int


@dataclass(frozen=True)
class HistogramField:
    """Per-location bin counts of the surrounding T x T patch."""

    counts: np.ndarray  # (C, N, H, W) float32
    patch_size: int


@dataclass(frozen=True)
class ReferenceHistogram:
    weights: np.ndarray  # (C, N) float64, per-channel mass T^2
    patch_size: int


def fit_quantizer(values: np.ndarray, n_bins: int) -> Quantizer:
    """Per-channel min/max range over a (C, H, W) value map."""
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    v = np.asarray(values)
    lo = v.reshape(v.shape[0], -1).min(axis=1).astype(np.float64)
    hi = v.reshape(v.shape[0], -1).max(axis=1).astype(np.float64)
    return Quantizer(lo=lo, hi=hi, n_bins=n_bins, degenerate=(hi <= lo))


def bin_indices(values: np.ndarray, q: Quantizer) -> BinIndexMap:
    """Map each value to clamp(floor((v - lo) * N / (hi - lo)), 0, N - 1)."""
    v = np.asarray(values, dtype=np.float64)
    if v.shape[0] != q.n_channels:
        raise ValueError("channel count mismatch with quantizer")
    lo = q.lo[:, None, None]
    span = (q.hi - q.lo)[:, None, None]
    safe = np.where(span > 0, span, 1.0)
    idx = np.floor((v - lo) * q.n_bins / safe).astype(np.int64)
    idx = np.clip(idx, 0, q.n_bins - 1)
    idx[q.degenerate] = 0
    return BinIndexMap(indices=idx.astype(np.int32), n_bins=q.n_bins)


def _channel_histograms(idx_plane: np.ndarray, n_bins: int, t: int,
                        pad: str) -> np.ndarray:
    """(N, H, W) float64 window counts for one channel's bin-index plane."""
    onehot = (idx_plane[None, :, :] == np.arange(n_bins)[:, None, None])
    return box_average_stack(onehot.astype(np.float32), t, pad=pad) * (t * t)


def patch_histograms(b: BinIndexMap, patch_size: int,
                     pad: str = "reflect") -> HistogramField:
    """Count, for every location, the bin memberships of its T x T window.

    Implemented as box sums over the N indicator planes, so the cost is
    independent of T.
    """
    if patch_size % 2 == 0:
        raise ValueError(f"patch size must be odd, got {patch_size}")
    planes = [
        _channel_histograms(b.indices[c], b.n_bins, patch_size, pad)
        for c in range(b.indices.shape[0])
    ]
    counts = np.stack(planes).astype(np.float32)
    return HistogramField(counts=counts, patch_size=patch_size)


def _sample_grid(h: int, w: int, budget: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic uniform stride grid with at most ``budget`` points."""
    stride = 1
    while ((h + stride - 1) // stride) * ((w + stride - 1) // stride) > budget:
        stride += 1
    ys = np.arange(0, h, stride)
    xs = np.arange(0, w, stride)
    return ys, xs


def sample_patches(values_plane: np.ndarray, patch_size: int,
                   sample_budget: int, pad: str = "reflect") -> np.ndarray:
    """(S, T^2) patch value matrix at deterministic grid locations."""
    h, w = values_plane.shape
    r = patch_size // 2
    arr = np.asarray(values_plane)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float64)
    padded = pad_plane(arr, r, pad)
    ys, xs = _sample_grid(h, w, sample_budget)
    win = np.lib.stride_tricks.sliding_window_view(
        padded, (patch_size, patch_size))
    patches = win[np.ix_(ys, xs)]
    return patches.reshape(-1, patch_size * patch_size)


def _lower_median(a: np.ndarray, axis: int = 0) -> np.ndarray:
    k = (a.shape[axis] - 1) // 2
    if a.ndim == 2 and axis == 0:
        # select along contiguous rows: cheaper than column-wise partition
        return np.partition(np.ascontiguousarray(a.T), k, axis=1)[:, k]
    return np.take(np.partition(a, k, axis=axis), k, axis=axis)


def _quantize_values_to_hist(vals: np.ndarray, lo: float, hi: float,
                             n_bins: int) -> np.ndarray:
    span = hi - lo if hi > lo else 1.0
    idx = np.clip(np.floor((vals - lo) * n_bins / span), 0, n_bins - 1)
    return np.bincount(idx.astype(np.int64), minlength=n_bins).astype(np.float64)


def select_reference(values: np.ndarray, q: Quantizer, patch_size: int,
                     mode: str = "median-quan", sample_budget: int = 4096,
                     pad: str = "reflect") -> ReferenceHistogram:
    """Global per-channel reference histogram from sampled patches.

    median-quan (default): per-rank lower median over the sorted sampled
    patches, quantized afterwards. mean-quan: per-rank mean, then quantize.
    quan-median / quan-mean: per-sample histograms first, then per-bin
    lower median / mean, rescaled to total mass T^2.
    """
    if mode not in REFERENCE_MODES:
        raise ValueError(f"unknown reference mode {mode!r}")
    if sample_budget < 1:
        raise ValueError("sample_budget must be >= 1")
    v = np.asarray(values)
    c_count = v.shape[0]
    t2 = patch_size * patch_size
    weights = np.zeros((c_count, q.n_bins), dtype=np.float64)
    for c in range(c_count):
        if q.degenerate[c]:
            weights[c, 0] = t2
            continue
        patches = sample_patches(v[c], patch_size, sample_budget, pad=pad)
        lo, hi = float(q.lo[c]), float(q.hi[c])
        if mode in ("median-quan", "mean-quan"):
            # ranking and order statistics are dtype-exact, so the input's
            # float32 values can be sorted as-is; only the mean and the
            # binning arithmetic need float64
            ranked = np.sort(patches, axis=1)
            if mode == "median-quan":
                ref_vec = _lower_median(ranked, axis=0).astype(np.float64)
            else:
                ref_vec = ranked.mean(axis=0, dtype=np.float64)
            weights[c] = _quantize_values_to_hist(ref_vec, lo, hi, q.n_bins)
        else:
            span = hi - lo
            vals64 = patches.astype(np.float64, copy=False)
            idx = np.clip(np.floor((vals64 - lo) * q.n_bins / span),
                          0, q.n_bins - 1).astype(np.int64)
            hists = np.zeros((patches.shape[0], q.n_bins), dtype=np.float64)
            rows = np.repeat(np.arange(patches.shape[0]), t2)
            np.add.at(hists, (rows, idx.ravel()), 1.0)
            if mode == "quan-median":
                w = _lower_median(hists, axis=0)
            else:
                w = hists.mean(axis=0)
            total = w.sum()
            weights[c] = w * (t2 / total) if total > 0 else 0.0
            if total <= 0:
                weights[c, 0] = t2
    return ReferenceHistogram(weights=weights, patch_size=patch_size)
