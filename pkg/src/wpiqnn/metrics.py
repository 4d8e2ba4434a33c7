"""Error metrics over a validation set."""
from __future__ import annotations

import numpy as np

from .errors import MetricError


def _pair(pred, ref):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    ref = np.asarray(ref, dtype=np.float64).ravel()
    if pred.shape != ref.shape:
        raise MetricError(f"prediction has {pred.size} values, reference has {ref.size}")
    return pred, ref


def relative_l2(pred, ref) -> float:
    """||pred - ref||_2 / ||ref||_2."""
    pred, ref = _pair(pred, ref)
    denom = np.linalg.norm(ref)
    if denom == 0:
        raise MetricError("relative L2 error is undefined for a zero reference")
    return float(np.linalg.norm(pred - ref) / denom)


def relative_linf(pred, ref) -> float:
    """max|pred - ref| / max|ref|."""
    pred, ref = _pair(pred, ref)
    denom = np.max(np.abs(ref)) if ref.size else 0.0
    if denom == 0:
        raise MetricError("relative L-infinity error is undefined for a zero reference")
    return float(np.max(np.abs(pred - ref)) / denom)
