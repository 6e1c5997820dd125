"""Seeded generator of miniature MVTec-layout datasets: stationary texture
images with planted anomalies and exact ground-truth masks. Used by tests
and benchmarks; real datasets are external downloads.
"""

from __future__ import annotations

import os
import zlib
from dataclasses import dataclass, replace

import numpy as np
from PIL import Image

KINDS = ("tiles", "noise", "stripes")
ANOMALY_SHAPES = ("square", "blob")


@dataclass(frozen=True)
class SynthConfig:
    kind: str = "noise"
    anomaly: str = "square"
    size: int = 256
    n_images: int = 10
    n_good: int = 3
    anomaly_frac: float = 0.02  # target anomalous-area fraction
    seed: int = 0


def _smooth_noise(rng: np.random.Generator, h: int, w: int,
                  sigma: float) -> np.ndarray:
    """Periodic band-limited noise in roughly [-1, 1]."""
    z = rng.standard_normal((h, w))
    f = np.fft.rfft2(z)
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.rfftfreq(w)[None, :]
    g = np.exp(-2 * (np.pi * sigma) ** 2 * (fy ** 2 + fx ** 2))
    out = np.fft.irfft2(f * g, s=(h, w))
    return out / (np.abs(out).max() + 1e-12)


def _texture(kind: str, rng: np.random.Generator, n: int,
             variant: int = 0) -> np.ndarray:
    """A 3 x n x n stationary base texture in [0, 1]."""
    if kind == "noise":
        base = 0.5 + 0.35 * _smooth_noise(rng, n, n, 1.5)
        tint = np.array([1.0, 0.9, 0.8]) if variant == 0 else np.array([0.8, 0.9, 1.0])
        return np.clip(base[None] * tint[:, None, None], 0, 1)
    if kind == "stripes":
        yy, xx = np.mgrid[0:n, 0:n]
        angle = np.pi / 5 if variant == 0 else np.pi / 2.4
        period = 14.0 if variant == 0 else 9.0
        phase = 2.0 * _smooth_noise(rng, n, n, 4.0)
        wave = np.sin(2 * np.pi * (xx * np.cos(angle) + yy * np.sin(angle))
                      / period + phase)
        img = 0.5 + 0.3 * wave + 0.06 * _smooth_noise(rng, n, n, 0.8)
        return np.clip(np.stack([img, img * 0.95, img * 0.9]), 0, 1)
    if kind == "tiles":
        # mildly bimodal: a shared noise texture with an alternating
        # checkerboard color tilt; the cell period stays well above the
        # scoring patch size
        cell = n // 4
        yy, xx = np.mgrid[0:n, 0:n]
        mode_b = ((yy // cell + xx // cell) % 2).astype(bool)
        if variant:
            # swap-in texture: slightly dark grain with independent color
            # channels — the level shift separates it marginally and the
            # channel decorrelation separates it from the rank-2 base
            chans = [0.42 + 0.28 * _smooth_noise(rng, n, n, 0.8)
                     for _ in range(3)]
            return np.clip(np.stack(chans), 0, 1)
        base = 0.5 + 0.30 * _smooth_noise(rng, n, n, 1.2)
        tilt = np.where(mode_b, 0.06, -0.06)
        return np.clip(np.stack([base + tilt, base, base - tilt]), 0, 1)
    raise ValueError(f"unknown kind {kind!r}")


def _anomaly_mask(shape: str, rng: np.random.Generator, n: int,
                  frac: float) -> np.ndarray:
    margin = n // 8
    if shape == "square":
        side = max(4, int(round(np.sqrt(frac) * n)))
        y = rng.integers(margin, n - margin - side)
        x = rng.integers(margin, n - margin - side)
        mask = np.zeros((n, n), dtype=bool)
        mask[y:y + side, x:x + side] = True
        return mask
    if shape == "blob":
        field = _smooth_noise(rng, n, n, 4.0)
        cy = rng.integers(margin, n - margin)
        cx = rng.integers(margin, n - margin)
        yy, xx = np.mgrid[0:n, 0:n]
        radius = np.sqrt(frac / np.pi) * n * 1.2
        bump = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * radius ** 2))
        score = bump * (1.0 + 0.35 * field)
        # threshold at the quantile that yields the requested area
        thr = np.quantile(score, 1.0 - frac)
        return score >= thr
    raise ValueError(f"unknown anomaly shape {shape!r}")


def _plant_anomaly(image: np.ndarray, mask: np.ndarray, kind: str,
                   rng: np.random.Generator) -> np.ndarray:
    n = image.shape[1]
    out = image.copy()
    style = int(rng.integers(0, 2))
    if style == 0:
        # contrast patch: push the region brightness away from its mean
        delta = 0.28 * (1 if rng.random() < 0.5 else -1)
        out[:, mask] = np.clip(out[:, mask] + delta, 0, 1)
    else:
        # texture swap: replace the region with the alternate texture
        other = _texture(kind, rng, n, variant=1)
        out[:, mask] = other[:, mask]
    return out


def _save_png(path: str, arr: np.ndarray) -> None:
    if arr.ndim == 3:
        img = Image.fromarray(
            np.round(arr.transpose(1, 2, 0) * 255).astype(np.uint8))
    else:
        img = Image.fromarray((arr.astype(np.uint8)) * 255)
    img.save(path, format="PNG")


def generate_class(out_root: str, class_name: str, cfg: SynthConfig) -> None:
    """Write one class in MVTec layout under ``out_root``."""
    rng = np.random.default_rng([cfg.seed, zlib.crc32(class_name.encode())])
    good_dir = os.path.join(out_root, class_name, "test", "good")
    bad_dir = os.path.join(out_root, class_name, "test", "planted")
    gt_dir = os.path.join(out_root, class_name, "ground_truth", "planted")
    os.makedirs(good_dir, exist_ok=True)
    os.makedirs(bad_dir, exist_ok=True)
    os.makedirs(gt_dir, exist_ok=True)
    for i in range(cfg.n_images):
        image = _texture(cfg.kind, rng, cfg.size)
        if i < cfg.n_good:
            _save_png(os.path.join(good_dir, f"{i:03d}.png"), image)
            continue
        mask = _anomaly_mask(cfg.anomaly, rng, cfg.size, cfg.anomaly_frac)
        image = _plant_anomaly(image, mask, cfg.kind, rng)
        _save_png(os.path.join(bad_dir, f"{i:03d}.png"), image)
        _save_png(os.path.join(gt_dir, f"{i:03d}_mask.png"), mask)


def generate_dataset(out_root: str, cfg: SynthConfig,
                     kinds: tuple[str, ...] | None = None) -> list[str]:
    """Generate one class per kind; returns the class names."""
    kinds = kinds or (cfg.kind,)
    names = []
    for kind in kinds:
        generate_class(out_root, kind, replace(cfg, kind=kind))
        names.append(kind)
    return names
