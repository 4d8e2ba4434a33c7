"""
Strongly-entangling variational circuits.

A layer applies R_Z(alpha) R_Y(beta) R_Z(gamma) (alpha first) to every wire,
then the circular CNOT chain CNOT(0,1), CNOT(1,2), ..., CNOT(n-2,n-1),
CNOT(n-1,0). With a single wire the chain is empty. The readout is the vector
of per-wire Pauli-Z expectations.

Gradients come from a reverse (adjoint) sweep that keeps two live
statevectors; ``qnn_gradient_parameter_shift`` is the independent check.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .statevector import (
    PAULI,
    StateVector,
    _apply_1q,
    _apply_cnot,
    _apply_rotation,
    _expectations_z,
    _z_signs,
)

LAYER_AXES = ("Z", "Y", "Z")


@dataclass(eq=False)
class CircuitParams:
    """Rotation angles of a layered circuit, shape (n_layers, n_qubits, 3)."""

    angles: np.ndarray

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=np.float64)
        if self.angles.ndim != 3 or self.angles.shape[2] != 3:
            raise ConfigurationError(f"circuit angles must have shape (layers, qubits, 3), got {self.angles.shape}")

    @property
    def n_layers(self) -> int:
        return self.angles.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.angles.shape[1]

    @property
    def size(self) -> int:
        return self.angles.size

    @classmethod
    def zeros(cls, n_qubits, n_layers):
        return cls(np.zeros((n_layers, n_qubits, 3)))


def _entangler(n):
    if n < 2:
        return []
    return [(k, k + 1) for k in range(n - 1)] + [(n - 1, 0)]


def _ops(angles):
    """Flat gate list: ('rot', axis, wire, index) or ('cnot', control, target)."""
    n_layers, n, _ = angles.shape
    ops = []
    for layer in range(n_layers):
        for k in range(n):
            for p, axis in enumerate(LAYER_AXES):
                ops.append(("rot", axis, k, (layer, k, p)))
        ops.extend(("cnot", c, t) for c, t in _entangler(n))
    return ops


def _run(amps, n, angles):
    for op in _ops(angles):
        if op[0] == "rot":
            amps = _apply_rotation(amps, n, op[1], op[2], angles[op[3]])
        else:
            amps = _apply_cnot(amps, n, op[1], op[2])
    return amps


def _check(state, params):
    if state.n_qubits != params.n_qubits:
        raise ConfigurationError(
            f"input state has {state.n_qubits} qubits but circuit has {params.n_qubits}"
        )


def strongly_entangling_layer(state: StateVector, layer_angles) -> StateVector:
    layer_angles = np.asarray(layer_angles, dtype=np.float64)
    if layer_angles.shape != (state.n_qubits, 3):
        raise ConfigurationError(
            f"layer angles must have shape ({state.n_qubits}, 3), got {layer_angles.shape}"
        )
    return StateVector(state.n_qubits, _run(state.amplitudes, state.n_qubits, layer_angles[None]))


def circuit_state(input_state: StateVector, params: CircuitParams) -> StateVector:
    """U(theta)|input>."""
    _check(input_state, params)
    return StateVector(params.n_qubits, _run(input_state.amplitudes, params.n_qubits, params.angles))


def qnn_forward(input_state: StateVector, params: CircuitParams) -> np.ndarray:
    """Per-wire <Z> after the circuit, shape (..., n_qubits)."""
    _check(input_state, params)
    n = params.n_qubits
    return _expectations_z(_run(input_state.amplitudes, n, params.angles), n)


def _check_cotangent(cotangent, input_state, n):
    cot = np.asarray(cotangent, dtype=np.float64)
    expected = input_state.amplitudes.shape[:-1] + (n,)
    if cot.shape != expected:
        raise ConfigurationError(f"cotangent shape {cot.shape} does not match expectations shape {expected}")
    return cot


def qnn_gradient_adjoint(input_state: StateVector, params: CircuitParams, cotangent, return_input_grad=False):
    """Gradient of ``sum(cotangent * expectations)`` w.r.t. the circuit angles.

    Batched inputs are summed over the batch. With ``return_input_grad`` also
    returns the derivative w.r.t. real perturbations of the input amplitudes,
    shape (..., 2**n).
    """
    _check(input_state, params)
    n = params.n_qubits
    cot = _check_cotangent(cotangent, input_state, n)
    angles = params.angles
    psi = _run(input_state.amplitudes, n, angles)
    # adjoint state: O|psi> with O = sum_q w_q Z_q (diagonal)
    signs = np.stack([_z_signs(n, q) for q in range(n)], axis=-1)
    lam = psi * (cot @ signs.T)
    grad = np.zeros_like(angles)
    batch_axes = tuple(range(psi.ndim - 1))
    for op in reversed(_ops(angles)):
        if op[0] == "cnot":
            psi = _apply_cnot(psi, n, op[1], op[2])
            lam = _apply_cnot(lam, n, op[1], op[2])
            continue
        _, axis, wire, index = op
        # dR/dtheta = -i/2 P R  =>  dE/dtheta = Im <lam| P |psi_after>
        p_psi = _apply_1q(psi, n, wire, PAULI[axis])
        overlap = np.sum(np.conj(lam) * p_psi, axis=-1)
        grad[index] = np.sum(overlap.imag, axis=batch_axes) if batch_axes else overlap.imag
        psi = _apply_rotation(psi, n, axis, wire, -angles[index])
        lam = _apply_rotation(lam, n, axis, wire, -angles[index])
    if return_input_grad:
        return grad, 2.0 * lam.real
    return grad


def qnn_gradient_parameter_shift(input_state: StateVector, params: CircuitParams, cotangent) -> np.ndarray:
    """Two-term shift rule, exact for Pauli rotations: (E(t + pi/2) - E(t - pi/2)) / 2."""
    _check(input_state, params)
    n = params.n_qubits
    cot = _check_cotangent(cotangent, input_state, n)
    grad = np.zeros_like(params.angles)
    for index in np.ndindex(params.angles.shape):
        shifted = []
        for shift in (np.pi / 2, -np.pi / 2):
            angles = params.angles.copy()
            angles[index] += shift
            shifted.append(_expectations_z(_run(input_state.amplitudes, n, angles), n))
        grad[index] = np.sum(cot * (shifted[0] - shifted[1])) / 2
    return grad
