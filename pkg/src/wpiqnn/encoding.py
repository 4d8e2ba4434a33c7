"""Classical-to-quantum data encodings."""
from __future__ import annotations

import numpy as np

from .errors import CapacityError, ConfigurationError, NormalizationError
from .statevector import AXES, StateVector


def _features(values):
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 0:
        v = v[None]
    if v.shape[-1] < 1:
        raise ConfigurationError("feature vector must have at least one entry")
    if not np.all(np.isfinite(v)):
        raise ConfigurationError("feature vector has non-finite entries")
    return v


def angle_encode(features, n_qubits: int, axis: str = "Y") -> StateVector:
    """Rotate qubit k of |0...0> by ``features[k]`` around ``axis``.

    Qubits beyond the feature count are left untouched. ``features`` may carry
    leading batch dimensions, giving a batched state.
    """
    if axis not in AXES:
        raise ConfigurationError(f"unknown rotation axis {axis!r}")
    v = _features(features)
    if v.shape[-1] > n_qubits:
        raise CapacityError(f"{v.shape[-1]} features need at least {v.shape[-1]} qubits, got {n_qubits}")
    batch = v.shape[:-1]
    # the encoded state is a product state: kron of R(f_k)|0> over wires
    amps = np.ones(batch + (1,), dtype=np.complex128)
    for k in range(n_qubits):
        wire = np.zeros(batch + (2,), dtype=np.complex128)
        if k < v.shape[-1]:
            wire[...] = _rotated_zero(axis, v[..., k])
        else:
            wire[..., 0] = 1.0
        amps = (amps[..., :, None] * wire[..., None, :]).reshape(batch + (-1,))
    return StateVector(n_qubits, amps)


def _rotated_zero(axis, angles):
    """First column of R_axis(angle), i.e. R|0>, shape angles.shape + (2,)."""
    c, s = np.cos(angles / 2), np.sin(angles / 2)
    if axis == "Y":
        return np.stack([c, s], axis=-1).astype(np.complex128)
    if axis == "X":
        return np.stack([c + 0j, -1j * s], axis=-1)
    return np.stack([np.exp(-0.5j * angles), np.zeros_like(c, dtype=np.complex128)], axis=-1)


def amplitude_encode(features, n_qubits: int) -> StateVector:
    """Normalize ``features`` and write them as amplitudes, zero-padded to 2**n."""
    v = _features(features)
    if v.shape[-1] > 2**n_qubits:
        raise CapacityError(f"{v.shape[-1]} features exceed 2**{n_qubits} amplitudes")
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise NormalizationError("cannot amplitude-encode an all-zero feature vector")
    amps = np.zeros(v.shape[:-1] + (2**n_qubits,), dtype=np.complex128)
    amps[..., : v.shape[-1]] = v / norm
    return StateVector(n_qubits, amps)


def amplitude_encode_vjp(features, cotangent):
    """Pull a cotangent on the (real, unpadded) normalized vector back to ``features``.

    For v = z / |z| the Jacobian is (I - v v^T) / |z|.
    """
    z = np.asarray(features, dtype=np.float64)
    g = np.asarray(cotangent, dtype=np.float64)
    norm = np.linalg.norm(z, axis=-1, keepdims=True)
    v = z / norm
    return (g - v * np.sum(v * g, axis=-1, keepdims=True)) / norm


def rescale_to_angle(coords, lower, upper):
    """Affine map of each coordinate column from [lower, upper] onto [0, pi]."""
    coords = np.asarray(coords, dtype=np.float64)
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    return np.pi * (coords - lower) / (upper - lower)
