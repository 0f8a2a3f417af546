"""Noise-robust classification: robust warm-up, confidence-based sample
selection, label-dependent losses on raw and pseudo labels, and self-training
with a confidence penalty, on synthetic datasets with injected label noise."""

from ._kernels import BACKEND_NAME as kernel_backend

__version__ = "0.1.0"
__all__ = ["kernel_backend", "__version__"]
