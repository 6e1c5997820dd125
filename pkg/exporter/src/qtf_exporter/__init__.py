"""Offline exporter of pretrained CNN block-2 feature maps to QTF1 files.

The anomaly-localization pipeline consumes the output purely through the
QTF1 tensor format and the ``{"scale": 8}`` sidecar; nothing here imports
that package.
"""

from .export import (ExportError, ExportSpec, WeightsError, export_features,
                     write_qtf1)

__version__ = "0.1.0"

__all__ = [
    "ExportError",
    "ExportSpec",
    "WeightsError",
    "export_features",
    "write_qtf1",
    "__version__",
]
