"""
Gradient oracles: adjoint vs parameter-shift vs central differences on random
circuits, and the full loss gradient vs central differences on a shrunken
copy of an experiment config.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .config import TrainConfig
from .qnn import CircuitParams, qnn_forward, qnn_gradient_adjoint, qnn_gradient_parameter_shift
from .statevector import StateVector
from .training import LossBundle, total_loss


@dataclass
class CircuitCheck:
    n_qubits: int
    n_layers: int
    adjoint_vs_shift: float  # max abs difference
    fd_rel: float  # relative 2-norm error of the adjoint gradient vs central differences


def _rel(a, b):
    denom = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / denom) if denom > 0 else float(np.linalg.norm(a - b))


def random_state(rng, n_qubits) -> StateVector:
    amps = rng.normal(size=2**n_qubits) + 1j * rng.normal(size=2**n_qubits)
    return StateVector(n_qubits, amps / np.linalg.norm(amps))


def check_circuit(rng, n_qubits, n_layers, h=1e-6) -> CircuitCheck:
    state = random_state(rng, n_qubits)
    params = CircuitParams(rng.uniform(-np.pi, np.pi, (n_layers, n_qubits, 3)))
    cot = rng.normal(size=n_qubits)
    adj = qnn_gradient_adjoint(state, params, cot)
    shift = qnn_gradient_parameter_shift(state, params, cot)
    fd = np.zeros_like(adj)
    for idx in np.ndindex(adj.shape):
        for sign in (1.0, -1.0):
            angles = params.angles.copy()
            angles[idx] += sign * h
            fd[idx] += sign * np.dot(cot, qnn_forward(state, CircuitParams(angles))) / (2 * h)
    return CircuitCheck(n_qubits, n_layers, float(np.max(np.abs(adj - shift))), _rel(adj.ravel(), fd.ravel()))


def circuit_suite(n_circuits=50, seed=0, max_qubits=5, max_layers=3) -> list[CircuitCheck]:
    rng = np.random.default_rng(seed)
    return [
        check_circuit(rng, int(rng.integers(1, max_qubits + 1)), int(rng.integers(1, max_layers + 1)))
        for _ in range(n_circuits)
    ]


def toy_config(config: TrainConfig) -> TrainConfig:
    """Same problem and mode, shrunk to a few dozen points and parameters."""
    toy = copy.deepcopy(config)
    a = toy.architecture
    a.resolutions = {"x": [0, 0], "y": [-1, -1]}
    a.q1, a.l1, a.q2, a.l2 = 2, 1, 5, 1
    a.truncate = None
    p = toy.points
    p.n_collocation, p.n_boundary, p.n_initial = 32, 12, 12
    p.n_interface = 8 if p.n_interface or config.problem.params.get("medium") == "heterogeneous" else 0
    p.validation_grid = [8, 8]
    return toy


def loss_gradient_check(config: TrainConfig, seed=0, h=1e-6) -> list[float]:
    """Relative error of the analytic loss gradient for each subdomain network."""
    bundle = LossBundle.from_config(config, seed)
    params = bundle.init_params(seed)
    weights = config.training.loss_weights
    _, grads = total_loss(params, bundle, weights)
    errors = []
    for sub, p in enumerate(params):
        vec = p.to_vector()
        fd = np.zeros_like(vec)
        for i in range(vec.size):
            for sign in (1.0, -1.0):
                shifted = vec.copy()
                shifted[i] += sign * h
                trial = list(params)
                trial[sub] = p.with_vector(shifted)
                fd[i] += sign * total_loss(trial, bundle, weights, with_grad=False)[0].total / (2 * h)
        errors.append(_rel(grads[sub].to_vector(), fd))
    return errors
