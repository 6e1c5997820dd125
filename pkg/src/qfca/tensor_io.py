"""Tensor file format (QTF1), image loading and MVTec-style dataset indexing.

The QTF1 format is deliberately tiny so that any language can read it with a
few lines of code:

    magic "QTF1" | dtype u8 (1=float32, 2=uint8) | ndim u8 |
    ndim x u64 little-endian dims | raw row-major little-endian data

No padding, no trailing bytes.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

MAGIC = b"QTF1"

_DTYPE_CODES = {np.dtype(np.float32): 1, np.dtype(np.uint8): 2}
_CODE_DTYPES = {1: np.dtype(np.float32), 2: np.dtype(np.uint8)}


class TensorFormatError(Exception):
    """Base class for QTF1 format violations."""


class BadMagicError(TensorFormatError):
    pass


class TruncatedError(TensorFormatError):
    pass


class UnsupportedDtypeError(TensorFormatError):
    pass


class DecodeError(Exception):
    """Raised when an image file cannot be decoded."""


class DatasetIndexError(Exception):
    """Raised when a dataset tree violates the expected layout."""


@dataclass(frozen=True)
class Tensor:
    """Dense row-major tensor, the unit of exchange across the QTF1 boundary."""

    dtype: np.dtype
    shape: tuple[int, ...]
    data: np.ndarray  # flat, C-order

    def __post_init__(self):
        if np.dtype(self.dtype) not in _DTYPE_CODES:
            raise UnsupportedDtypeError(f"unsupported dtype {self.dtype}")
        if not (1 <= len(self.shape) <= 4):
            raise ValueError(f"ndim must be in [1, 4], got {len(self.shape)}")
        if any(d < 1 for d in self.shape):
            raise ValueError(f"shape entries must be >= 1, got {self.shape}")
        n = int(np.prod(self.shape))
        if self.data.size != n:
            raise ValueError(f"data length {self.data.size} != prod(shape) {n}")

    @staticmethod
    def from_array(a: np.ndarray) -> "Tensor":
        a = np.ascontiguousarray(a)
        return Tensor(dtype=a.dtype, shape=tuple(a.shape), data=a.ravel())

    def to_array(self) -> np.ndarray:
        return self.data.reshape(self.shape)


def write_tensor(t: Tensor, path: str | os.PathLike) -> None:
    """Serialize ``t`` to ``path`` in the QTF1 byte layout."""
    code = _DTYPE_CODES.get(np.dtype(t.dtype))
    if code is None:
        raise UnsupportedDtypeError(f"unsupported dtype {t.dtype}")
    header = MAGIC + struct.pack("<BB", code, len(t.shape))
    header += struct.pack(f"<{len(t.shape)}Q", *t.shape)
    payload = np.ascontiguousarray(t.data, dtype=t.dtype)
    payload = payload.astype(payload.dtype.newbyteorder("<"), copy=False)
    try:
        with open(path, "wb") as f:
            f.write(header)
            f.write(payload.tobytes())
    except OSError as e:
        raise OSError(f"failed writing tensor to {path}: {e}") from e


def read_tensor(path: str | os.PathLike) -> Tensor:
    """Inverse of :func:`write_tensor`, validating every header field."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {raw[:4]!r}")
    if len(raw) < 6:
        raise TruncatedError(f"{path}: header truncated")
    code, ndim = struct.unpack_from("<BB", raw, 4)
    if code not in _CODE_DTYPES:
        raise UnsupportedDtypeError(f"{path}: unknown dtype code {code}")
    if not (1 <= ndim <= 4):
        raise TensorFormatError(f"{path}: ndim {ndim} outside [1, 4]")
    if len(raw) < 6 + 8 * ndim:
        raise TruncatedError(f"{path}: dims truncated")
    shape = struct.unpack_from(f"<{ndim}Q", raw, 6)
    dtype = _CODE_DTYPES[code]
    n = int(np.prod(shape))
    off = 6 + 8 * ndim
    expected = off + n * dtype.itemsize
    if len(raw) < expected:
        raise TruncatedError(
            f"{path}: payload truncated ({len(raw)} bytes, expected {expected})"
        )
    if len(raw) > expected:
        raise TensorFormatError(f"{path}: {len(raw) - expected} trailing bytes")
    data = np.frombuffer(raw, dtype=dtype.newbyteorder("<"), count=n, offset=off)
    return Tensor(dtype=dtype, shape=tuple(int(s) for s in shape),
                  data=data.astype(dtype, copy=False))


def _resize_plane(plane: np.ndarray, out_h: int, out_w: int,
                  interpolation: str) -> np.ndarray:
    """Resize a 2-D plane with half-pixel-center sample alignment."""
    h, w = plane.shape
    if (h, w) == (out_h, out_w):
        return plane.astype(np.float32, copy=False)
    # source coordinates of each output pixel center
    ys = (np.arange(out_h) + 0.5) * h / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * w / out_w - 0.5
    if interpolation == "nearest":
        yi = np.clip(np.round(ys), 0, h - 1).astype(int)
        xi = np.clip(np.round(xs), 0, w - 1).astype(int)
        return plane[np.ix_(yi, xi)].astype(np.float32)
    if interpolation != "bilinear":
        raise ValueError(f"unknown interpolation {interpolation!r}")
    y0 = np.clip(np.floor(ys), 0, h - 1).astype(int)
    x0 = np.clip(np.floor(xs), 0, w - 1).astype(int)
    y1 = np.clip(y0 + 1, 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    fy = np.clip(ys - y0, 0.0, 1.0)[:, None]
    fx = np.clip(xs - x0, 0.0, 1.0)[None, :]
    p = plane.astype(np.float64)
    top = p[np.ix_(y0, x0)] * (1 - fx) + p[np.ix_(y0, x1)] * fx
    bot = p[np.ix_(y1, x0)] * (1 - fx) + p[np.ix_(y1, x1)] * fx
    return (top * (1 - fy) + bot * fy).astype(np.float32)


def resize_image(image: np.ndarray, out_h: int, out_w: int,
                 interpolation: str = "bilinear") -> np.ndarray:
    """Resize a C x H x W float image channel-wise."""
    return np.stack([_resize_plane(c, out_h, out_w, interpolation)
                     for c in image])


def load_image(path: str | os.PathLike, size: int | tuple[int, int] | None = None,
               interpolation: str = "bilinear") -> Tensor:
    """Decode a PNG/PPM file into a 3 x H x W float32 tensor in [0, 1].

    Grayscale images are replicated to 3 channels. ``size`` optionally
    requests a resize (nearest or bilinear, half-pixel centers).
    """
    try:
        with Image.open(path) as im:
            im = im.convert("RGB") if im.mode not in ("L", "RGB") else im
            arr = np.asarray(im)
    except Exception as e:
        raise DecodeError(f"cannot decode {path}: {e}") from e
    if arr.ndim == 2:
        arr = np.repeat(arr[None], 3, axis=0)
    else:
        arr = arr.transpose(2, 0, 1)[:3]
    img = arr.astype(np.float32) / 255.0
    if size is not None:
        if isinstance(size, int):
            size = (size, size)
        img = resize_image(img, size[0], size[1], interpolation)
    return Tensor.from_array(np.ascontiguousarray(img))


def load_mask(path: str | os.PathLike, size: int | tuple[int, int] | None = None
              ) -> np.ndarray:
    """Load a ground-truth mask as a binary H x W array (any value > 0)."""
    t = load_image(path, size=size, interpolation="nearest")
    return (t.to_array()[0] > 0.0)


@dataclass(frozen=True)
class DatasetSample:
    image_path: str
    mask_path: str | None
    is_anomalous: bool
    defect_type: str


@dataclass(frozen=True)
class DatasetIndex:
    class_name: str
    samples: list[DatasetSample] = field(default_factory=list)


def load_dataset(root: str | os.PathLike, class_name: str,
                 layout: str = "mvtec") -> DatasetIndex:
    """Index an MVTec-style tree: root/class/test/<defect>/*.png with masks
    at root/class/ground_truth/<defect>/*_mask.png; "good" has no masks.

    Ordering is lexicographic by defect then filename, so repeated loads
    produce identical indices on any platform.
    """
    if layout != "mvtec":
        raise ValueError(f"unknown layout {layout!r}")
    test_dir = os.path.join(root, class_name, "test")
    gt_dir = os.path.join(root, class_name, "ground_truth")
    if not os.path.isdir(test_dir):
        raise DatasetIndexError(f"missing test directory {test_dir}")
    samples: list[DatasetSample] = []
    for defect in sorted(os.listdir(test_dir)):
        ddir = os.path.join(test_dir, defect)
        if not os.path.isdir(ddir):
            continue
        anomalous = defect != "good"
        for fname in sorted(os.listdir(ddir)):
            if not fname.lower().endswith((".png", ".ppm")):
                continue
            image_path = os.path.join(ddir, fname)
            mask_path = None
            if anomalous:
                stem = os.path.splitext(fname)[0]
                mask_path = os.path.join(gt_dir, defect, stem + "_mask.png")
                if not os.path.isfile(mask_path):
                    raise DatasetIndexError(
                        f"anomalous sample {image_path} has no mask at {mask_path}")
            samples.append(DatasetSample(image_path, mask_path, anomalous, defect))
    return DatasetIndex(class_name=class_name, samples=samples)
