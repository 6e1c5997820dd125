"""Quantized patch-transport texture anomaly localization.

A zero-shot pipeline: features are quantized per channel, every pixel's
surrounding patch becomes a histogram (counted in O(1) per bin via
summed-area tables), each histogram is compared to a global reference with
a linear-time 1-D optimal-transport walk, and the per-bin errors are routed
back to pixels and smoothed into an anomaly map.
"""

__version__ = "0.1.0"

from .features import (FeatureMap, FilterBankConfig, PcaModel,
                       extract_filterbank, load_external_features, pca_fit,
                       pca_residual)
from .metrics import (EvalSample, MetricReport, auroc_image, auroc_pixel,
                      connected_components, f1_optimal, pro_at_fpr)
from .pooling import (SummedAreaTable, box_average, box_sum, build_sat,
                      naive_box_average)
from .quantize import (BinIndexMap, HistogramField, Quantizer,
                       ReferenceHistogram, bin_indices, fit_quantizer,
                       patch_histograms, select_reference)
from .scoring import (AnomalyMap, PipelineConfig, aggregate_channels,
                      associate_errors, bin_error_maps, detect, smooth_scores,
                      upsample_scores)
from .tensor_io import (DatasetIndex, Tensor, load_dataset, load_image,
                        read_tensor, write_tensor)
from .transport import (quantized_mismatch, sorted_mismatch_oracle,
                        w2sq_gradient_check, wasserstein1_histogram)
