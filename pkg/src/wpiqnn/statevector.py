"""
Dense double-precision statevector simulation.

Bit ordering: qubit 0 is the most significant bit of the basis index, so for
n qubits the basis state |b_0 b_1 ... b_{n-1}> sits at index
sum_q b_q * 2**(n - 1 - q).

All public operations take a StateVector and return a new one. The raw-array
helpers (prefixed with an underscore) accept amplitude arrays with arbitrary
leading batch dimensions and are what the circuit code uses internally.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError

MAX_QUBITS = 24
AXES = ("X", "Y", "Z")

# Amplitude updates performed by gate kernels; see ``op_count``/``reset_op_count``.
_OP_COUNT = [0]


def op_count() -> int:
    """Number of amplitude updates performed by gate kernels since the last reset."""
    return _OP_COUNT[0]


def reset_op_count() -> None:
    _OP_COUNT[0] = 0


@dataclass(frozen=True, eq=False)
class StateVector:
    """An n-qubit pure state (or a batch of them along leading axes)."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_n_qubits(self.n_qubits)
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape[-1:] != (2**self.n_qubits,):
            raise ConfigurationError(
                f"amplitude array has trailing length {amps.shape[-1:]} "
                f"but {self.n_qubits} qubits need {2**self.n_qubits}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> np.ndarray | float:
        n = np.linalg.norm(self.amplitudes, axis=-1)
        return float(n) if n.ndim == 0 else n


def _check_n_qubits(n_qubits):
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigurationError(f"n_qubits must be an integer in [1, {MAX_QUBITS}], got {n_qubits!r}")


def _check_qubit(qubit, n_qubits):
    if not 0 <= qubit < n_qubits:
        raise IndexError(f"qubit {qubit} out of range for {n_qubits} qubits")


def rotation_matrix(axis: str, angle: float) -> np.ndarray:
    """2x2 matrix of R_axis(angle) = exp(-i angle P / 2)."""
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    if axis == "X":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
    if axis == "Y":
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    if axis == "Z":
        return np.array([[np.exp(-0.5j * angle), 0], [0, np.exp(0.5j * angle)]], dtype=np.complex128)
    raise ConfigurationError(f"unknown rotation axis {axis!r}; expected one of {AXES}")


PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def _split(amps, n, qubit):
    # view as (..., high, 2, low) so axis -2 is the target bit
    return amps.reshape(amps.shape[:-1] + (2**qubit, 2, 2 ** (n - qubit - 1)))


def _apply_1q(amps: np.ndarray, n: int, qubit: int, matrix: np.ndarray) -> np.ndarray:
    """Apply a 2x2 matrix to ``qubit``; returns a new array."""
    v = _split(amps, n, qubit)
    a0, a1 = v[..., 0, :], v[..., 1, :]
    out = np.empty_like(v)
    out[..., 0, :] = matrix[0, 0] * a0 + matrix[0, 1] * a1
    out[..., 1, :] = matrix[1, 0] * a0 + matrix[1, 1] * a1
    _OP_COUNT[0] += amps.size
    return out.reshape(amps.shape)


def _apply_rotation(amps, n, axis, qubit, angle):
    if axis == "Z":
        v = _split(amps, n, qubit)
        out = np.empty_like(v)
        out[..., 0, :] = v[..., 0, :] * np.exp(-0.5j * angle)
        out[..., 1, :] = v[..., 1, :] * np.exp(0.5j * angle)
        _OP_COUNT[0] += amps.size
        return out.reshape(amps.shape)
    return _apply_1q(amps, n, qubit, rotation_matrix(axis, angle))


@lru_cache(maxsize=256)
def _cnot_permutation(n, control, target):
    idx = np.arange(2**n)
    cbit = 1 << (n - 1 - control)
    tbit = 1 << (n - 1 - target)
    perm = np.where(idx & cbit, idx ^ tbit, idx)
    perm.setflags(write=False)
    return perm


def _apply_cnot(amps, n, control, target):
    _OP_COUNT[0] += amps.size
    return amps[..., _cnot_permutation(n, control, target)]


def _z_signs(n, qubit):
    idx = np.arange(2**n)
    return np.where(idx & (1 << (n - 1 - qubit)), -1.0, 1.0)


def _expectations_z(amps, n):
    """Per-wire <Z_q> for every qubit; shape (..., n)."""
    probs = np.abs(amps) ** 2
    p = probs.reshape(probs.shape[:-1] + (2,) * n)
    out = np.empty(probs.shape[:-1] + (n,))
    batch_axes = probs.ndim - 1
    for q in range(n):
        axes = tuple(batch_axes + i for i in range(n) if i != q)
        marg = p.sum(axis=axes)
        out[..., q] = marg[..., 0] - marg[..., 1]
    return out


def init_zero_state(n_qubits: int) -> StateVector:
    """|0...0> on ``n_qubits`` qubits."""
    _check_n_qubits(n_qubits)
    amps = np.zeros(2**n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def apply_rotation(state: StateVector, axis: str, qubit: int, angle: float) -> StateVector:
    if axis not in AXES:
        raise ConfigurationError(f"unknown rotation axis {axis!r}; expected one of {AXES}")
    _check_qubit(qubit, state.n_qubits)
    if not np.isfinite(angle):
        raise ConfigurationError(f"rotation angle must be finite, got {angle}")
    return StateVector(state.n_qubits, _apply_rotation(state.amplitudes, state.n_qubits, axis, qubit, angle))


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    if control == target:
        raise ConfigurationError(f"CNOT control and target must differ (both {control})")
    _check_qubit(control, state.n_qubits)
    _check_qubit(target, state.n_qubits)
    return StateVector(state.n_qubits, _apply_cnot(state.amplitudes, state.n_qubits, control, target))


def expectation_z(state: StateVector, qubit: int) -> float | np.ndarray:
    """<Z> on one wire: sum_i |a_i|^2 * (+1 if bit is 0 else -1)."""
    _check_qubit(qubit, state.n_qubits)
    probs = np.abs(state.amplitudes) ** 2
    val = probs @ _z_signs(state.n_qubits, qubit)
    return float(val) if np.ndim(val) == 0 else val


def expectations_z(state: StateVector) -> np.ndarray:
    """<Z_q> for every wire q, shape (..., n_qubits)."""
    return _expectations_z(state.amplitudes, state.n_qubits)
