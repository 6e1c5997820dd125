"""Wide-residual-network block-2 feature export.

Images are resized to the requested resolution, normalized with the usual
large-image-corpus statistics, and pushed through the backbone up to the
second convolutional block (stride 8, 512 channels). The result is written
as a float32 ``[C, H/8, W/8]`` QTF1 tensor with a ``{"scale": 8}`` JSON
sidecar next to it.
"""

from __future__ import annotations

import glob
import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

STRIDE = 8
BLOCK2_CHANNELS = 512

# channel statistics used by the pretrained weights
_MEAN = (0.485, 0.456, 0.406)
_STD = (0.229, 0.224, 0.225)

_MAGIC = b"QTF1"
_DTYPE_F32 = 1


class ExportError(ValueError):
    """Invalid export request."""


class WeightsError(RuntimeError):
    """Backbone weights could not be obtained."""


@dataclass(frozen=True)
class ExportSpec:
    inputs: tuple[str, ...]
    out_dir: str
    resolution: int = 1024
    weights: str = "pretrained"  # "pretrained" | "random" | path to .pth
    layer: str = "block2"

    def __post_init__(self):
        if self.resolution % STRIDE != 0:
            raise ExportError(
                f"resolution {self.resolution} not divisible by the network "
                f"stride {STRIDE}")
        if self.layer != "block2":
            raise ExportError(f"unsupported layer tag {self.layer!r}")
        if not self.inputs:
            raise ExportError("no input images given")


def write_qtf1(path: str, array: np.ndarray) -> None:
    """Serialize a float32 array: magic, dtype u8, ndim u8, u64-LE dims,
    then raw little-endian data."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<BB", _DTYPE_F32, arr.ndim))
        for d in arr.shape:
            f.write(struct.pack("<Q", d))
        f.write(arr.tobytes())


def _build_backbone(weights: str):
    import torch
    from torchvision.models import Wide_ResNet50_2_Weights, wide_resnet50_2

    if weights == "random":
        torch.manual_seed(0)
        model = wide_resnet50_2(weights=None)
    elif weights == "pretrained":
        try:
            model = wide_resnet50_2(
                weights=Wide_ResNet50_2_Weights.IMAGENET1K_V1)
        except Exception as e:  # hub download unavailable, corrupt cache, ...
            raise WeightsError(
                "could not obtain pretrained weights; download them on a "
                "connected machine (torchvision wide_resnet50_2, "
                "IMAGENET1K_V1) and pass the .pth path via --weights"
            ) from e
    else:
        if not os.path.isfile(weights):
            raise WeightsError(
                f"weights file {weights!r} not found; pass 'pretrained', "
                "'random', or a readable .pth path")
        model = wide_resnet50_2(weights=None)
        state = torch.load(weights, map_location="cpu")
        model.load_state_dict(state)
    # keep only the stem and the first two blocks (stride 8 output)
    trunk = torch.nn.Sequential(
        model.conv1, model.bn1, model.relu, model.maxpool,
        model.layer1, model.layer2)
    trunk.eval()
    return trunk


def _load_image_tensor(path: str, resolution: int):
    import torch

    try:
        img = Image.open(path).convert("RGB")
    except Exception as e:
        raise ExportError(f"cannot decode image {path!r}: {e}") from e
    img = img.resize((resolution, resolution), Image.BILINEAR)
    arr = np.asarray(img, dtype=np.float32) / 255.0
    arr = (arr - np.array(_MEAN, np.float32)) / np.array(_STD, np.float32)
    return torch.from_numpy(arr.transpose(2, 0, 1)[None])


def export_features(spec: ExportSpec) -> list[str]:
    """Run every input through the backbone; returns the written QTF paths."""
    import torch

    paths: list[str] = []
    for pattern in spec.inputs:
        matches = sorted(glob.glob(pattern))
        paths.extend(matches if matches else [pattern])
    missing = [p for p in paths if not os.path.isfile(p)]
    if missing:
        raise ExportError(f"input image(s) not found: {missing}")

    trunk = _build_backbone(spec.weights)
    os.makedirs(spec.out_dir, exist_ok=True)
    written = []
    with torch.no_grad():
        for path in paths:
            x = _load_image_tensor(path, spec.resolution)
            feats = trunk(x)[0].numpy().astype(np.float32)
            stem = os.path.splitext(os.path.basename(path))[0]
            out_path = os.path.join(spec.out_dir, stem + ".qtf")
            write_qtf1(out_path, feats)
            with open(out_path + ".json", "w") as f:
                json.dump({"scale": STRIDE}, f)
                f.write("\n")
            written.append(out_path)
    return written
