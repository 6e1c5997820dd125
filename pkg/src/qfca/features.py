"""Feature maps for the scoring pipeline: a training-free filter-bank
extractor, loading of externally computed CNN features, and PCA-residual
preprocessing (subtracting the rank-k reconstruction from the features).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .tensor_io import Tensor, read_tensor

# Per color channel, in this order: identity, Gaussian blur at each sigma,
# d/dx and d/dy of the blurred plane at each sigma, Laplacian at each sigma.
FILTER_SIGMAS = (1.0, 2.0, 4.0)
FILTERS_PER_COLOR = 1 + 4 * len(FILTER_SIGMAS)


class FormatError(Exception):
    """External feature file does not match the expected layout."""


@dataclass(frozen=True)
class FeatureMap:
    values: np.ndarray  # (C, H, W) float32
    scale: int = 1  # downsampling factor relative to the input image

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ValueError("feature values must be (C, H, W)")
        if self.scale < 1:
            raise ValueError("scale must be >= 1")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class FilterBankConfig:
    scale: int = 4  # matches a CNN second-block stride


def _gauss_kernel(sigma: float) -> np.ndarray:
    radius = int(np.ceil(3 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _sep_convolve(plane: np.ndarray, kernel: np.ndarray,
                  pad: str = "reflect") -> np.ndarray:
    """Separable 2-D convolution with a symmetric 1-D kernel, reflect pad."""
    r = kernel.size // 2
    mode = {"reflect": "reflect", "wrap": "wrap", "zero": "constant"}[pad]
    p = np.pad(plane, ((r, r), (0, 0)), mode=mode)
    rows = np.zeros_like(plane, dtype=np.float64)
    for i, kv in enumerate(kernel):
        rows += kv * p[i:i + plane.shape[0]]
    p = np.pad(rows, ((0, 0), (r, r)), mode=mode)
    out = np.zeros_like(rows)
    for i, kv in enumerate(kernel):
        out += kv * p[:, i:i + plane.shape[1]]
    return out


def gaussian_blur(plane: np.ndarray, sigma: float,
                  pad: str = "reflect") -> np.ndarray:
    if sigma <= 0:
        return np.asarray(plane, dtype=np.float64)
    return _sep_convolve(np.asarray(plane, dtype=np.float64),
                         _gauss_kernel(sigma), pad=pad)


def _central_diff(plane: np.ndarray, axis: int) -> np.ndarray:
    fwd = np.roll(plane, -1, axis=axis)
    bwd = np.roll(plane, 1, axis=axis)
    d = (fwd - bwd) / 2.0
    # one-sided differences at the borders instead of wraparound
    if axis == 0:
        d[0] = plane[1] - plane[0]
        d[-1] = plane[-1] - plane[-2]
    else:
        d[:, 0] = plane[:, 1] - plane[:, 0]
        d[:, -1] = plane[:, -1] - plane[:, -2]
    return d


def _downsample(plane: np.ndarray, scale: int) -> np.ndarray:
    if scale == 1:
        return plane
    h = (plane.shape[0] // scale) * scale
    w = (plane.shape[1] // scale) * scale
    v = plane[:h, :w].reshape(h // scale, scale, w // scale, scale)
    return v.mean(axis=(1, 3))


def extract_filterbank(image: np.ndarray,
                       config: FilterBankConfig | None = None) -> FeatureMap:
    """Fixed filter-bank features of a 3 x H x W image in [0, 1].

    Per color channel: the raw plane, Gaussian blurs at sigma in {1, 2, 4},
    x/y central derivatives of each blurred plane, and the Laplacian of each
    blurred plane; all block-averaged down by ``config.scale``.
    """
    config = config or FilterBankConfig()
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3:
        raise ValueError("image must be (C, H, W)")
    planes = []
    for color in image:
        planes.append(color)
        blurred = [gaussian_blur(color, s) for s in FILTER_SIGMAS]
        for b in blurred:
            planes.append(b)
        for b in blurred:
            planes.append(_central_diff(b, axis=1))  # d/dx
            planes.append(_central_diff(b, axis=0))  # d/dy
        for b in blurred:
            lap = (_central_diff(_central_diff(b, axis=1), axis=1)
                   + _central_diff(_central_diff(b, axis=0), axis=0))
            planes.append(lap)
    down = np.stack([_downsample(p, config.scale) for p in planes])
    return FeatureMap(values=down.astype(np.float32), scale=config.scale)


def load_external_features(path: str | os.PathLike) -> FeatureMap:
    """Wrap a QTF1 float32 [C, H, W] tensor as a FeatureMap.

    The downsampling factor is read from a ``<path>.json`` sidecar with a
    {"scale": s} entry, defaulting to 8 when absent.
    """
    t = read_tensor(path)
    if len(t.shape) != 3 or np.dtype(t.dtype) != np.float32:
        raise FormatError(
            f"{path}: expected float32 [C, H, W], got {t.dtype} {t.shape}")
    scale = 8
    sidecar = str(path) + ".json"
    if os.path.isfile(sidecar):
        with open(sidecar) as f:
            scale = int(json.load(f)["scale"])
    return FeatureMap(values=t.to_array(), scale=scale)


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray  # (C,)
    components: np.ndarray  # (k, C), orthonormal rows
    eigenvalues: np.ndarray  # (k,), non-increasing


def pca_fit(f: FeatureMap, k: int) -> PcaModel:
    """Top-k principal components of the per-pixel feature vectors.

    Pixels are the samples, channels the dimensions. Population covariance
    (divisor H*W), symmetric eigensolver, components ordered by
    non-increasing eigenvalue. Sign convention: the largest-magnitude entry
    of each component is positive (determinism only; residuals are
    sign-invariant).
    """
    c = f.n_channels
    if not (1 <= k <= c):
        raise ValueError(f"k must be in [1, {c}], got {k}")
    x = f.values.reshape(c, -1).astype(np.float64).T  # (H*W, C)
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / x.shape[0]
    evals, evecs = np.linalg.eigh(cov)  # ascending
    order = np.argsort(evals, kind="stable")[::-1][:k]
    evals = np.clip(evals[order], 0.0, None)
    comps = evecs[:, order].T.copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(mean=mean, components=comps, eigenvalues=evals)


def pca_residual(f: FeatureMap, m: PcaModel) -> FeatureMap:
    """Per pixel: r = (x - mean) - V^T V (x - mean), same shape as input."""
    c = f.n_channels
    if m.mean.size != c:
        raise ValueError(
            f"model has {m.mean.size} channels, features have {c}")
    x = f.values.reshape(c, -1).astype(np.float64)
    xc = x - m.mean[:, None]
    proj = m.components.T @ (m.components @ xc)
    r = (xc - proj).reshape(f.values.shape)
    return FeatureMap(values=r.astype(np.float32), scale=f.scale)
