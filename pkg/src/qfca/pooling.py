"""Box pooling with summed-area tables: O(H*W) per plane, independent of the
kernel size, plus a direct O(H*W*k^2) oracle with identical padding semantics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PAD_MODES = ("zero", "reflect", "wrap")


def _check_kernel(k: int) -> int:
    if k < 1 or k % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 1, got {k}")
    return k // 2


def pad_plane(plane: np.ndarray, margin: int, pad: str) -> np.ndarray:
    """Pad a 2-D plane by ``margin`` on every side.

    reflect mirrors without repeating the edge pixel; wrap is toroidal.
    For planes smaller than the margin, reflection is applied repeatedly.
    """
    if margin == 0:
        return plane
    if pad == "zero":
        return np.pad(plane, margin, mode="constant")
    if pad == "reflect":
        if plane.shape[0] > 1 and plane.shape[1] > 1:
            return np.pad(plane, margin, mode="reflect")
        # np.pad reflect fails on degenerate axes; fall back to edge values
        mode = "edge"
        return np.pad(plane, margin, mode=mode)
    if pad == "wrap":
        return np.pad(plane, margin, mode="wrap")
    raise ValueError(f"unknown pad mode {pad!r}")


@dataclass(frozen=True)
class SummedAreaTable:
    """Integral image with a zero first row/column.

    ``cumsum[i, j]`` holds the float64 sum of the (padded) plane over rows
    < i and cols < j. ``margin`` records how much padding the plane carried;
    height/width refer to the original, unpadded plane.
    """

    height: int
    width: int
    margin: int
    cumsum: np.ndarray  # (H + 2*margin + 1, W + 2*margin + 1) float64


def build_sat(plane: np.ndarray, margin: int = 0, pad: str = "zero"
              ) -> SummedAreaTable:
    """Build the integral image of ``plane`` (optionally pre-padded)."""
    h, w = plane.shape
    padded = pad_plane(np.asarray(plane), margin, pad)
    cs = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.float64)
    np.cumsum(padded, axis=0, dtype=np.float64, out=cs[1:, 1:])
    np.cumsum(cs[1:, 1:], axis=1, out=cs[1:, 1:])
    return SummedAreaTable(height=h, width=w, margin=margin, cumsum=cs)


def _rect_sum(cs: np.ndarray, r0, r1, c0, c1):
    return cs[r1, c1] - cs[r0, c1] - cs[r1, c0] + cs[r0, c0]


def box_sum(sat: SummedAreaTable, cx: int, cy: int, k: int,
            pad: str = "zero") -> float:
    """Sum over the k x k window centered at row ``cx``, col ``cy``.

    ``pad='reflect'``/``'wrap'`` requires the SAT to have been built with the
    matching pad mode and margin >= k // 2; ``'zero'`` clamps the rectangle.
    """
    r = _check_kernel(k)
    if not (0 <= cx < sat.height and 0 <= cy < sat.width):
        raise ValueError(f"center ({cx}, {cy}) out of bounds")
    m = sat.margin
    if pad == "zero":
        r0 = max(cx - r, 0) + m
        r1 = min(cx + r + 1, sat.height) + m
        c0 = max(cy - r, 0) + m
        c1 = min(cy + r + 1, sat.width) + m
    elif pad in ("reflect", "wrap"):
        if m < r:
            raise ValueError(f"SAT margin {m} too small for kernel {k}")
        r0, r1 = cx - r + m, cx + r + 1 + m
        c0, c1 = cy - r + m, cy + r + 1 + m
    else:
        raise ValueError(f"unknown pad mode {pad!r}")
    return float(_rect_sum(sat.cumsum, r0, r1, c0, c1))


def _box_sum_map(plane: np.ndarray, k: int, pad: str) -> np.ndarray:
    """All k x k window sums of a 2-D plane, float64, via one SAT."""
    r = _check_kernel(k)
    h, w = plane.shape
    if pad == "zero":
        sat = build_sat(plane)
        rows = np.arange(h)
        cols = np.arange(w)
        r0 = np.maximum(rows - r, 0)
        r1 = np.minimum(rows + r + 1, h)
        c0 = np.maximum(cols - r, 0)
        c1 = np.minimum(cols + r + 1, w)
    else:
        sat = build_sat(plane, margin=r, pad=pad)
        rows = np.arange(h)
        cols = np.arange(w)
        r0, r1 = rows, rows + 2 * r + 1
        c0, c1 = cols, cols + 2 * r + 1
    cs = sat.cumsum
    return (cs[np.ix_(r1, c1)] - cs[np.ix_(r0, c1)]
            - cs[np.ix_(r1, c0)] + cs[np.ix_(r0, c0)])


def box_average(plane: np.ndarray, k: int, pad: str = "reflect") -> np.ndarray:
    """k x k local average; total work O(H*W) regardless of k."""
    return _box_sum_map(np.asarray(plane), k, pad) / float(k * k)


def box_average_stack(planes: np.ndarray, k: int, pad: str = "reflect"
                      ) -> np.ndarray:
    """Batched box_average over a (B, H, W) stack.

    The per-plane summation order is identical to :func:`box_average`, so
    results do not depend on how the batch is chunked.
    """
    r = _check_kernel(k)
    b, h, w = planes.shape
    if pad == "zero":
        padded = planes.astype(np.float64, copy=False)
    else:
        mode = {"reflect": "reflect", "wrap": "wrap"}[pad]
        padded = np.pad(planes, ((0, 0), (r, r), (r, r)), mode=mode)
    # zero top/left guard row keeps the corner formula branch-free while the
    # cumsums stay contiguous
    cs = np.zeros((b, padded.shape[1] + 1, padded.shape[2] + 1), np.float64)
    cs[:, 1:, 1:] = padded
    cs = cs.cumsum(axis=1).cumsum(axis=2)
    if pad == "zero":
        rows = np.arange(h)
        cols = np.arange(w)
        r0 = np.maximum(rows - r, 0)
        r1 = np.minimum(rows + r + 1, h)
        c0 = np.maximum(cols - r, 0)
        c1 = np.minimum(cols + r + 1, w)
        out = (cs[:, r1[:, None], c1[None, :]] - cs[:, r0[:, None], c1[None, :]]
               - cs[:, r1[:, None], c0[None, :]] + cs[:, r0[:, None], c0[None, :]])
    else:
        # window corners are contiguous ranges, so plain slices suffice
        out = cs[:, k:k + h, k:k + w] - cs[:, :h, k:k + w]
        out -= cs[:, k:k + h, :w]
        out += cs[:, :h, :w]
    return out / float(k * k)


def naive_box_average(plane: np.ndarray, k: int, pad: str = "reflect"
                      ) -> np.ndarray:
    """Direct O(H*W*k^2) shifted summation, same padding semantics."""
    r = _check_kernel(k)
    plane = np.asarray(plane)
    h, w = plane.shape
    padded = pad_plane(plane.astype(np.float64), r, pad)
    acc = np.zeros((h, w), dtype=np.float64)
    for dy in range(k):
        for dx in range(k):
            acc += padded[dy:dy + h, dx:dx + w]
    return acc / float(k * k)
