"""End-to-end anomaly map: per-bin transport errors against a global
reference, error-to-pixel association, channel aggregation and smoothing.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from . import transport
from .transport import _EPS_FACTOR, _mismatch_row
from .features import FeatureMap, gaussian_blur, pca_fit, pca_residual
from .pooling import box_average_stack
from .quantize import (BinIndexMap, HistogramField, Quantizer,
                       ReferenceHistogram, _channel_histograms, bin_indices,
                       fit_quantizer, select_reference)
from .tensor_io import _resize_plane


@dataclass(frozen=True)
class PipelineConfig:
    n_bins: int = 16
    patch_size: int = 9
    sigma_p: float = math.inf  # inf = uniform average over the patch window
    sigma_s: float = 1.0
    pca_components: int = 0  # 0 = plain pipeline; > 0 enables the residual path
    reference_mode: str = "median-quan"
    sample_budget: int = 4096
    border_exclusion: int | None = None  # None -> patch_size // 2
    pad: str = "reflect"

    def __post_init__(self):
        if self.patch_size % 2 == 0 or self.patch_size < 1:
            raise ValueError("patch_size must be odd and >= 1")
        if self.n_bins < 1:
            raise ValueError("n_bins must be >= 1")
        if self.sigma_s < 0:
            raise ValueError("sigma_s must be >= 0")

    @property
    def border(self) -> int:
        if self.border_exclusion is None:
            return self.patch_size // 2
        return self.border_exclusion


@dataclass(frozen=True)
class AnomalyMap:
    scores: np.ndarray  # (H, W) float
    image_score: float
    degenerate: bool = False  # every channel was constant


def bin_error_maps(hf: HistogramField, ref: ReferenceHistogram,
                   q: Quantizer) -> np.ndarray:
    """(C, N, H, W) per-bin mismatch scores at every location.

    Channels are processed one at a time; the reference is rescaled to each
    patch's mass inside the kernel. Degenerate channels yield zero maps.
    """
    c_count, n, h, w = hf.counts.shape
    out = np.zeros((c_count, n, h, w), dtype=np.float64)
    for c in range(c_count):
        if q.degenerate[c]:
            continue
        out[c] = channel_error_maps(hf.counts[c], ref.weights[c], q.centers(c))
    return out


def channel_error_maps(counts: np.ndarray, ref_w: np.ndarray,
                       centers: np.ndarray) -> np.ndarray:
    """(N, H, W) error maps for one channel's (N, H, W) histogram field."""
    n, h, w = counts.shape
    pb = np.ascontiguousarray(
        counts.transpose(1, 2, 0).reshape(-1, n).astype(np.float64))
    out = np.empty_like(pb)
    transport.mismatch_batch(pb, np.ascontiguousarray(ref_w, dtype=np.float64),
                             np.ascontiguousarray(centers, dtype=np.float64),
                             out)
    return out.reshape(h, w, n).transpose(2, 0, 1)


def _smooth_error_planes(planes: np.ndarray, cfg: PipelineConfig) -> np.ndarray:
    """Spatially smooth (N, H, W) error planes with a T-sized kernel."""
    t = cfg.patch_size
    if math.isinf(cfg.sigma_p):
        return box_average_stack(planes, t, pad=cfg.pad)
    r = t // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / cfg.sigma_p) ** 2)
    k /= k.sum()
    from .features import _sep_convolve
    return np.stack([_sep_convolve(p, k, pad=cfg.pad) for p in planes])


def associate_errors(err: np.ndarray, bins: BinIndexMap,
                     cfg: PipelineConfig) -> np.ndarray:
    """Smooth the (C, N, H, W) bin-error planes over the patch window and
    read each pixel's score from the plane of its own bin. Returns (C, H, W).
    """
    c_count = err.shape[0]
    out = np.zeros((c_count,) + err.shape[2:], dtype=np.float64)
    for c in range(c_count):
        smoothed = _smooth_error_planes(err[c], cfg)
        out[c] = np.take_along_axis(
            smoothed, bins.indices[c][None].astype(np.int64), axis=0)[0]
    return out


def aggregate_channels(scores: np.ndarray,
                       skip: np.ndarray | None = None) -> tuple[np.ndarray, bool]:
    """Mean over channels, excluding flagged (degenerate) ones.

    Returns (map, all_degenerate). An all-degenerate input yields zeros and
    a warning.
    """
    if scores.shape[0] < 1:
        raise ValueError("need at least one channel")
    if skip is None:
        skip = np.zeros(scores.shape[0], dtype=bool)
    keep = ~skip
    if not keep.any():
        warnings.warn("all channels degenerate; anomaly map is all zeros")
        return np.zeros(scores.shape[1:], dtype=np.float64), True
    return scores[keep].mean(axis=0), False


def smooth_scores(score_map: np.ndarray, sigma_s: float,
                  pad: str = "reflect") -> np.ndarray:
    """Final Gaussian low-pass with kernel radius ceil(3 * sigma_s)."""
    if sigma_s == 0:
        return np.asarray(score_map, dtype=np.float64)
    return gaussian_blur(score_map, sigma_s, pad=pad)


def image_score_of(scores: np.ndarray, border: int) -> float:
    """Maximum score over pixels at least ``border`` away from the edge."""
    h, w = scores.shape
    b = min(border, (h - 1) // 2, (w - 1) // 2)
    interior = scores[b:h - b, b:w - b] if b > 0 else scores
    return float(interior.max())


def upsample_scores(scores: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear upsampling of a score map to image resolution."""
    return _resize_plane(np.asarray(scores, dtype=np.float64), out_h, out_w,
                         "bilinear").astype(np.float64)


_PAD_CODES = {"zero": 0, "reflect": 1, "wrap": 2}


@njit(cache=True)
def _map_coord(c, n, pad_code):
    """Padded-plane coordinate -> source index, or -1 for zero padding."""
    if 0 <= c < n:
        return c
    if pad_code == 0:
        return -1
    if pad_code == 2:
        return c % n
    if n == 1:
        return 0
    while c < 0 or c >= n:
        if c < 0:
            c = -c
        if c >= n:
            c = 2 * n - 2 - c
    return c


@njit(cache=True)
def _channel_score_kernel(idx, nbins, t, pad_code, refw, centers, score_out):
    """Fused per-channel pipeline: window bin counts by per-bin indicator
    SATs, per-pixel transport errors, box smoothing of the error planes and
    own-bin gather. One float64 SAT buffer is reused throughout, keeping the
    dominant cost at O(nbins * H * W) independent of t.
    """
    h, w = idx.shape
    r = t // 2
    hp = h + 2 * r
    wp = w + 2 * r
    hw = h * w
    counts = np.empty((hw, nbins), np.float64)
    err = np.empty((hw, nbins), np.float64)
    sat = np.zeros((hp + 1, wp + 1), np.float64)
    ymap = np.empty(hp, np.int64)
    xmap = np.empty(wp, np.int64)
    for y in range(hp):
        ymap[y] = _map_coord(y - r, h, pad_code)
    for x in range(wp):
        xmap[x] = _map_coord(x - r, w, pad_code)
    for i in range(nbins):
        for y in range(hp):
            yy = ymap[y]
            rowsum = 0.0
            for x in range(wp):
                xx = xmap[x]
                if yy >= 0 and xx >= 0 and idx[yy, xx] == i:
                    rowsum += 1.0
                sat[y + 1, x + 1] = sat[y, x + 1] + rowsum
        for y in range(h):
            base = y * w
            for x in range(w):
                counts[base + x, i] = (sat[y + t, x + t] - sat[y, x + t]
                                       - sat[y + t, x] + sat[y, x])
    for p in range(hw):
        mp = 0.0
        for b in range(nbins):
            mp += counts[p, b]
        _mismatch_row(counts[p], refw, centers,
                      _EPS_FACTOR * max(mp, 1e-300), err[p])
    inv = 1.0 / (t * t)
    for i in range(nbins):
        for y in range(hp):
            yy = ymap[y]
            rowsum = 0.0
            for x in range(wp):
                xx = xmap[x]
                if yy >= 0 and xx >= 0:
                    rowsum += err[yy * w + xx, i]
                sat[y + 1, x + 1] = sat[y, x + 1] + rowsum
        for y in range(h):
            for x in range(w):
                if idx[y, x] == i:
                    score_out[y, x] = (sat[y + t, x + t] - sat[y, x + t]
                                       - sat[y + t, x] + sat[y, x]) * inv


def detect(f: FeatureMap, cfg: PipelineConfig | None = None,
           timings: dict | None = None) -> AnomalyMap:
    """Full anomaly-map pipeline on a feature map.

    Channels are streamed so the (C, N, H, W) error tensor is never fully
    materialized; per-channel scores accumulate into a fixed-order sum.
    """
    cfg = cfg or PipelineConfig()
    tick = time.perf_counter

    t0 = tick()
    if cfg.pca_components > 0:
        model = pca_fit(f, min(cfg.pca_components, f.n_channels))
        f = pca_residual(f, model)
    t1 = tick()

    values = f.values
    q = fit_quantizer(values, cfg.n_bins)
    bins = bin_indices(values, q)
    ref = select_reference(values, q, cfg.patch_size, mode=cfg.reference_mode,
                           sample_budget=cfg.sample_budget, pad=cfg.pad)
    t2 = tick()

    c_count, h, w = values.shape
    acc = np.zeros((h, w), dtype=np.float64)
    uniform = math.isinf(cfg.sigma_p)
    pad_code = _PAD_CODES[cfg.pad]
    chan_scores = np.empty((h, w), dtype=np.float64)
    used = 0
    for c in range(c_count):
        if q.degenerate[c]:
            continue
        if uniform:
            _channel_score_kernel(
                bins.indices[c], cfg.n_bins, cfg.patch_size, pad_code,
                np.ascontiguousarray(ref.weights[c], dtype=np.float64),
                np.ascontiguousarray(q.centers(c), dtype=np.float64),
                chan_scores)
            acc += chan_scores
        else:
            counts = _channel_histograms(bins.indices[c], cfg.n_bins,
                                         cfg.patch_size, cfg.pad)
            err = channel_error_maps(counts, ref.weights[c], q.centers(c))
            smoothed = _smooth_error_planes(err, cfg)
            acc += np.take_along_axis(
                smoothed, bins.indices[c][None].astype(np.int64), axis=0)[0]
        used += 1
    t3 = tick()

    degenerate = used == 0
    if degenerate:
        warnings.warn("all channels degenerate; anomaly map is all zeros")
        agg = acc
    else:
        agg = acc / used
    final = smooth_scores(agg, cfg.sigma_s, pad=cfg.pad)
    score = image_score_of(final, cfg.border)
    t4 = tick()

    if timings is not None:
        timings["pca_ms"] = (t1 - t0) * 1e3
        timings["quantize_ms"] = (t2 - t1) * 1e3
        timings["transport_ms"] = (t3 - t2) * 1e3
        timings["postprocess_ms"] = (t4 - t3) * 1e3
    return AnomalyMap(scores=final, image_score=score, degenerate=degenerate)


def save_heatmap_pgm(scores: np.ndarray, path: str) -> None:
    """8-bit binary PGM of a min-max normalized score map."""
    s = np.asarray(scores, dtype=np.float64)
    lo, hi = float(s.min()), float(s.max())
    norm = (s - lo) / (hi - lo) if hi > lo else np.zeros_like(s)
    img = np.round(norm * 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(img.tobytes())
