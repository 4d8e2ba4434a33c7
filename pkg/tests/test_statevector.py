import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wpiqnn.errors import ConfigurationError
from wpiqnn.statevector import (
    MAX_QUBITS,
    StateVector,
    _apply_cnot,
    _apply_rotation,
    apply_cnot,
    apply_rotation,
    expectation_z,
    expectations_z,
    init_zero_state,
    op_count,
    reset_op_count,
    rotation_matrix,
)


def basis_state(n, index):
    amps = np.zeros(2**n, dtype=complex)
    amps[index] = 1.0
    return StateVector(n, amps)


# ---------------------------------------------------------------- initial state


def test_zero_state_small():
    assert np.array_equal(init_zero_state(1).amplitudes, [1, 0])
    assert np.array_equal(init_zero_state(2).amplitudes, [1, 0, 0, 0])
    s = init_zero_state(3)
    assert s.amplitudes.shape == (8,) and s.norm() == pytest.approx(1.0)


@pytest.mark.parametrize("n", [0, -1, MAX_QUBITS + 1, 2.5])
def test_zero_state_rejects_bad_counts(n):
    with pytest.raises(ConfigurationError):
        init_zero_state(n)


def test_state_is_read_only():
    s = init_zero_state(2)
    with pytest.raises(ValueError):
        s.amplitudes[0] = 0


# ---------------------------------------------------------------- rotations


def test_ry_pi_flips_zero():
    out = apply_rotation(init_zero_state(1), "Y", 0, np.pi)
    assert np.allclose(out.amplitudes, [0, 1], atol=1e-15)


@pytest.mark.parametrize("axis", ["X", "Y", "Z"])
def test_zero_angle_is_identity(axis):
    rng = np.random.default_rng(1)
    amps = rng.normal(size=8) + 1j * rng.normal(size=8)
    s = StateVector(3, amps / np.linalg.norm(amps))
    assert np.array_equal(apply_rotation(s, axis, 1, 0.0).amplitudes, s.amplitudes)


def test_rz_phase_on_zero():
    theta = 0.731
    out = apply_rotation(init_zero_state(1), "Z", 0, theta)
    assert np.allclose(out.amplitudes, [np.exp(-0.5j * theta), 0], atol=1e-15)


@pytest.mark.parametrize("axis", ["X", "Y", "Z"])
def test_rotation_matrix_is_exponential(axis):
    # R = exp(-i theta P / 2) = cos(theta/2) I - i sin(theta/2) P
    pauli = {"X": [[0, 1], [1, 0]], "Y": [[0, -1j], [1j, 0]], "Z": [[1, 0], [0, -1]]}[axis]
    theta = 1.234
    expected = np.cos(theta / 2) * np.eye(2) - 1j * np.sin(theta / 2) * np.array(pauli)
    assert np.allclose(rotation_matrix(axis, theta), expected, atol=1e-15)


def test_rotation_acts_on_msb_first():
    # qubit 0 is the most significant bit: X on qubit 0 maps |00> to |10> (index 2)
    out = apply_rotation(init_zero_state(2), "X", 0, np.pi)
    assert abs(out.amplitudes[2]) == pytest.approx(1.0)


def test_rotation_errors():
    s = init_zero_state(2)
    with pytest.raises(IndexError):
        apply_rotation(s, "Y", 2, 0.1)
    with pytest.raises(ConfigurationError):
        apply_rotation(s, "W", 0, 0.1)
    with pytest.raises(ConfigurationError):
        apply_rotation(s, "Y", 0, np.nan)


# ---------------------------------------------------------------- CNOT


def test_cnot_truth_table():
    assert np.array_equal(apply_cnot(basis_state(2, 0b10), 0, 1).amplitudes, basis_state(2, 0b11).amplitudes)
    assert np.array_equal(apply_cnot(basis_state(2, 0b00), 0, 1).amplitudes, basis_state(2, 0b00).amplitudes)
    assert np.array_equal(apply_cnot(basis_state(2, 0b01), 1, 0).amplitudes, basis_state(2, 0b11).amplitudes)


def test_cnot_is_involution():
    rng = np.random.default_rng(2)
    amps = rng.normal(size=16) + 1j * rng.normal(size=16)
    s = StateVector(4, amps)
    twice = apply_cnot(apply_cnot(s, 3, 1), 3, 1)
    assert np.array_equal(twice.amplitudes, s.amplitudes)


def test_cnot_errors():
    s = init_zero_state(3)
    with pytest.raises(ConfigurationError):
        apply_cnot(s, 1, 1)
    with pytest.raises(IndexError):
        apply_cnot(s, 0, 3)


# ---------------------------------------------------------------- expectations


def test_expectation_examples():
    assert expectation_z(init_zero_state(1), 0) == pytest.approx(1.0)
    bell = StateVector(2, np.array([1, 0, 0, 1]) / np.sqrt(2))
    assert expectation_z(bell, 0) == pytest.approx(0.0, abs=1e-15)


def test_ry_expectation_is_cosine():
    rng = np.random.default_rng(3)
    for theta in rng.uniform(-2 * np.pi, 2 * np.pi, 100):
        s = apply_rotation(init_zero_state(1), "Y", 0, theta)
        assert abs(expectation_z(s, 0) - np.cos(theta)) < 1e-12


def test_expectations_vector_matches_single():
    rng = np.random.default_rng(4)
    amps = rng.normal(size=8) + 1j * rng.normal(size=8)
    s = StateVector(3, amps / np.linalg.norm(amps))
    assert np.allclose(expectations_z(s), [expectation_z(s, q) for q in range(3)], atol=1e-15)


def test_batched_amplitudes():
    amps = np.stack([basis_state(2, i).amplitudes for i in range(4)])
    z = expectations_z(StateVector(2, amps))
    assert np.array_equal(z, [[1, 1], [1, -1], [-1, 1], [-1, -1]])


# ---------------------------------------------------------------- properties

gate = st.tuples(st.sampled_from(["X", "Y", "Z", "CNOT"]), st.integers(0, 5), st.integers(0, 5),
                 st.floats(-10, 10, allow_nan=False))


@settings(max_examples=1000, deadline=None)
@given(st.integers(1, 6), st.lists(gate, max_size=12), st.integers(0, 2**32 - 1))
def test_unitarity(n, gates, seed):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    s = StateVector(n, amps / np.linalg.norm(amps))
    for kind, a, b, theta in gates:
        a, b = a % n, b % n
        if kind == "CNOT":
            if n > 1 and a != b:
                s = apply_cnot(s, a, b)
        else:
            s = apply_rotation(s, kind, a, theta)
    assert abs(s.norm() - 1.0) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5), st.sampled_from(["X", "Y", "Z"]), st.integers(0, 4), st.floats(-7, 7),
       st.integers(0, 2**32 - 1))
def test_gate_linearity(n, axis, q, theta, seed):
    # raw amplitudes: the private appliers never renormalize
    q = q % n
    rng = np.random.default_rng(seed)
    p1, p2 = (rng.normal(size=2**n) + 1j * rng.normal(size=2**n) for _ in range(2))
    a, b = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
    lhs = _apply_rotation(a * p1 + b * p2, n, axis, q, theta)
    rhs = a * _apply_rotation(p1, n, axis, q, theta) + b * _apply_rotation(p2, n, axis, q, theta)
    assert np.allclose(lhs, rhs, atol=1e-12, rtol=0)
    if n > 1:
        t = (q + 1) % n
        lhs = _apply_cnot(a * p1 + b * p2, n, q, t)
        rhs = a * _apply_cnot(p1, n, q, t) + b * _apply_cnot(p2, n, q, t)
        assert np.allclose(lhs, rhs, atol=1e-12, rtol=0)


@pytest.mark.parametrize("n", [3, 6, 10])
def test_gate_cost_is_linear_in_dimension(n):
    s = init_zero_state(n)
    reset_op_count()
    apply_rotation(s, "Y", n // 2, 0.3)
    single = op_count()
    reset_op_count()
    apply_cnot(s, 0, n - 1)
    cnot = op_count()
    assert single == 2**n
    assert cnot == 2**n
