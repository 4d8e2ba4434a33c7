"""Wavelet-based physics-informed quantum neural networks on a NumPy statevector simulator."""

from .errors import (
    AggregationError,
    CapacityError,
    ConfigurationError,
    MetricError,
    NormalizationError,
    TrainingError,
    WpiqnnError,
)

__version__ = "0.1.0"

__all__ = [
    "AggregationError",
    "CapacityError",
    "ConfigurationError",
    "MetricError",
    "NormalizationError",
    "TrainingError",
    "WpiqnnError",
    "__version__",
]
