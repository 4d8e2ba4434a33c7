"""
The two-stage quantum network that predicts wavelet coefficients.

Pipeline for a probe point p (coordinates already mapped to [0, pi]):

    angle_encode(p) -> QNN1 -> z (per-wire <Z>)
    amplitude_encode(z) -> QNN2 -> e (per-wire <Z>)
    c_f = W_f e + b_f            (one linear head per output field f)
    u_f(x) = sum_m c_f[m] Psi_m(x) + B_f

In ``global`` mode a single probe (the domain midpoint) yields one
coefficient vector per field for the whole domain, so every spatial
derivative of u acts on the wavelet basis only and is exact. In
``per_point`` mode each collocation point is its own probe; derivatives
still act on the basis only (coefficient dependence on x is not
differentiated).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .encoding import amplitude_encode, amplitude_encode_vjp, angle_encode
from .errors import ConfigurationError, NormalizationError
from .qnn import CircuitParams, qnn_forward, qnn_gradient_adjoint

MODES = ("global", "per_point")
CHECKPOINT_VERSION = 1
FEATURE_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class Architecture:
    n_coefficients: int
    q1: int = 4
    l1: int = 2
    q2: int = 13
    l2: int = 4
    n_fields: int = 1
    input_dim: int = 2
    use_qnn1: bool = True
    encoding_axis: str = "Y"

    def __post_init__(self):
        if self.n_coefficients < 1:
            raise ConfigurationError("n_coefficients must be positive")
        if self.use_qnn1 and self.input_dim > self.q1:
            raise ConfigurationError(f"QNN1 with {self.q1} qubits cannot angle-encode {self.input_dim} inputs")
        if self.q2 < 1 or self.l2 < 1:
            raise ConfigurationError("QNN2 needs at least one qubit and one layer")
        n_features = self.q1 if self.use_qnn1 else self.input_dim
        if n_features > 2**self.q2:
            raise ConfigurationError(f"{n_features} features do not fit into {self.q2} qubits")

    @property
    def parameter_count(self) -> int:
        circuits = 3 * self.q2 * self.l2 + (3 * self.q1 * self.l1 if self.use_qnn1 else 0)
        return circuits + self.n_fields * (self.n_coefficients * (self.q2 + 1) + 1)


@dataclass(eq=False)
class ModelParams:
    """Trainable state of one network. Head arrays carry a leading field axis."""

    qnn1: CircuitParams | None
    qnn2: CircuitParams
    head_weights: np.ndarray  # (n_fields, n_coefficients, q2)
    head_bias: np.ndarray  # (n_fields, n_coefficients)
    solution_bias: np.ndarray  # (n_fields,)

    def arrays(self) -> list[np.ndarray]:
        out = [] if self.qnn1 is None else [self.qnn1.angles]
        return out + [self.qnn2.angles, self.head_weights, self.head_bias, self.solution_bias]

    @property
    def size(self) -> int:
        return sum(a.size for a in self.arrays())

    def to_vector(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_vector(self, vec) -> "ModelParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.size,):
            raise ConfigurationError(f"parameter vector has length {vec.size}, expected {self.size}")
        parts, start = [], 0
        for a in self.arrays():
            parts.append(vec[start : start + a.size].reshape(a.shape).copy())
            start += a.size
        if self.qnn1 is None:
            parts.insert(0, None)
        q1, q2, w, b, sb = parts
        return ModelParams(None if q1 is None else CircuitParams(q1), CircuitParams(q2), w, b, sb)

    def zeros_like(self) -> "ModelParams":
        return self.with_vector(np.zeros(self.size))


def init_params(arch: Architecture, seed: int) -> ModelParams:
    """Circuit angles ~ U(-pi, pi); head weights Xavier-uniform; biases zero."""
    rng = np.random.default_rng(seed)
    qnn1 = CircuitParams(rng.uniform(-np.pi, np.pi, (arch.l1, arch.q1, 3))) if arch.use_qnn1 else None
    qnn2 = CircuitParams(rng.uniform(-np.pi, np.pi, (arch.l2, arch.q2, 3)))
    bound = np.sqrt(6.0 / (arch.q2 + arch.n_coefficients))
    weights = rng.uniform(-bound, bound, (arch.n_fields, arch.n_coefficients, arch.q2))
    return ModelParams(
        qnn1,
        qnn2,
        weights,
        np.zeros((arch.n_fields, arch.n_coefficients)),
        np.zeros(arch.n_fields),
    )


@dataclass
class FeatureTape:
    probe: np.ndarray
    stage1: object  # encoded QNN1 input state (None when bypassed)
    z: np.ndarray  # features fed to amplitude encoding
    stage2: object  # amplitude-encoded QNN2 input state
    e: np.ndarray  # QNN2 expectations


def quantum_features(params: ModelParams, probe, encoding_axis="Y") -> FeatureTape:
    """Run both circuits for one probe (d,) or a batch (N, d)."""
    probe = np.asarray(probe, dtype=np.float64)
    if params.qnn1 is not None:
        stage1 = angle_encode(probe, params.qnn1.n_qubits, encoding_axis)
        z = qnn_forward(stage1, params.qnn1)
    else:
        stage1, z = None, probe
    # round-off leaves ~1e-17 where the expectations cancel exactly; that has no direction to encode
    if np.any(np.linalg.norm(np.atleast_2d(z), axis=-1) < FEATURE_NORM_FLOOR):
        raise NormalizationError(f"QNN1 produced an all-zero feature vector for probe {probe.tolist()}")
    stage2 = amplitude_encode(z, params.qnn2.n_qubits)
    e = qnn_forward(stage2, params.qnn2)
    return FeatureTape(probe, stage1, z, stage2, e)


def quantum_features_vjp(params: ModelParams, tape: FeatureTape, g_e):
    """Gradients (qnn1_angles | None, qnn2_angles) of sum(g_e * e)."""
    g_q2, g_amp = qnn_gradient_adjoint(tape.stage2, params.qnn2, g_e, return_input_grad=True)
    if params.qnn1 is None:
        return None, g_q2
    g_z = amplitude_encode_vjp(tape.z, g_amp[..., : tape.z.shape[-1]])
    return qnn_gradient_adjoint(tape.stage1, params.qnn1, g_z), g_q2


def _check_mode(mode):
    if mode not in MODES:
        raise ConfigurationError(f"coefficient mode must be one of {MODES}, got {mode!r}")


def predict_coefficients(params: ModelParams, probe, mode="global", encoding_axis="Y") -> np.ndarray:
    """Wavelet coefficients: (n_fields, M) in global mode, (N, n_fields, M) per point."""
    _check_mode(mode)
    tape = quantum_features(params, probe, encoding_axis)
    e = tape.e
    if mode == "per_point" and e.ndim == 1:
        e = e[None]
    return np.einsum("fmq,...q->...fm", params.head_weights, e) + params.head_bias


def model_vjp(params: ModelParams, probe, mode, cotangent, encoding_axis="Y") -> ModelParams:
    """Gradient of sum(cotangent * predict_coefficients(...)) w.r.t. every parameter."""
    _check_mode(mode)
    tape = quantum_features(params, probe, encoding_axis)
    cot = np.asarray(cotangent, dtype=np.float64)
    w = params.head_weights
    if mode == "per_point":
        e = np.atleast_2d(tape.e)
        if cot.size != e.shape[0] * params.head_bias.size:
            raise ConfigurationError(f"cotangent shape {cot.shape} does not match per-point coefficients")
        cot = cot.reshape((e.shape[0],) + params.head_bias.shape)
        g_e = np.einsum("nfm,fmq->nq", cot, w).reshape(tape.e.shape)
        g_w = np.einsum("nfm,nq->fmq", cot, e)
        g_b = cot.sum(axis=0)
    else:
        if cot.shape != params.head_bias.shape:
            raise ConfigurationError(f"cotangent shape {cot.shape} does not match coefficients {params.head_bias.shape}")
        g_e = np.einsum("fm,fmq->q", cot, w)
        g_w = cot[:, :, None] * tape.e[None, None, :]
        g_b = cot.copy()
    g_q1, g_q2 = quantum_features_vjp(params, tape, g_e)
    return ModelParams(
        None if g_q1 is None else CircuitParams(g_q1),
        CircuitParams(g_q2),
        g_w,
        g_b,
        np.zeros_like(params.solution_bias),
    )


def reconstruct(c, basis, order=None, solution_bias=0.0) -> np.ndarray:
    """u = Psi^(order) c (+ B at order zero); ``c`` may be per-point rows (N, M)."""
    order = order if order is not None else (0,) * basis.ndim
    order_t = (order,) if np.isscalar(order) else tuple(order)
    c = np.asarray(c, dtype=np.float64)
    if c.shape[-1] != basis.n_members:
        raise ConfigurationError(f"{c.shape[-1]} coefficients for a basis with {basis.n_members} members")
    if c.ndim == 1:
        u = basis.matvec(order_t, c)
    else:
        if c.shape[0] != basis.n_points:
            raise ConfigurationError(f"{c.shape[0]} coefficient rows for {basis.n_points} points")
        u = basis.rowwise(order_t, c)
    return u + solution_bias if not any(order_t) else u


class WaveletQNN:
    """One network over one rectangular domain with a fixed wavelet family.

    ``evaluate`` returns field values and derivatives on named point sets;
    ``pullback`` turns cotangents on those arrays into parameter gradients.
    """

    def __init__(self, arch: Architecture, family, lower, upper, mode="global"):
        _check_mode(mode)
        if family.size != arch.n_coefficients:
            raise ConfigurationError(
                f"architecture expects {arch.n_coefficients} coefficients, family has {family.size}"
            )
        self.arch = arch
        self.family = family
        self.lower = np.asarray(lower, dtype=np.float64)
        self.upper = np.asarray(upper, dtype=np.float64)
        self.mode = mode

    def probe_for(self, points=None):
        if self.mode == "global" or points is None:
            mid = 0.5 * (self.lower + self.upper)
            return np.pi * (mid - self.lower) / (self.upper - self.lower)
        return np.pi * (np.asarray(points) - self.lower) / (self.upper - self.lower)

    def evaluate(self, params: ModelParams, bases: dict, requests: dict):
        """``requests`` maps point-set name -> iterable of (field_index, order)."""
        values, tape = {}, {"features": {}}
        if self.mode == "global":
            feats = quantum_features(params, self.probe_for(), self.arch.encoding_axis)
            tape["features"][None] = feats
            coeffs = params.head_weights @ feats.e + params.head_bias
            tape["coeffs"] = coeffs
            for name, reqs in requests.items():
                for f, order in reqs:
                    values[name, f, order] = reconstruct(coeffs[f], bases[name], order, params.solution_bias[f])
            return values, tape
        for name, reqs in requests.items():
            basis = bases[name]
            feats = quantum_features(params, self.probe_for(basis.points), self.arch.encoding_axis)
            tape["features"][name] = feats
            for f, order in reqs:
                pw = basis.matmat(order, params.head_weights[f])  # (N, q2)
                tape[name, f, order] = pw
                u = np.einsum("nq,nq->n", feats.e, pw) + basis.matvec(order, params.head_bias[f])
                values[name, f, order] = u + params.solution_bias[f] if not any(order) else u
        return values, tape

    def pullback(self, params: ModelParams, bases: dict, tape, cotangents: dict) -> ModelParams:
        grads = params.zeros_like()
        if self.mode == "global":
            g_c = np.zeros_like(params.head_bias)
            for (name, f, order), w in cotangents.items():
                g_c[f] += bases[name].rmatvec(order, w)
                if not any(order):
                    grads.solution_bias[f] += np.sum(w)
            feats = tape["features"][None]
            grads.head_weights[...] = g_c[:, :, None] * feats.e[None, None, :]
            grads.head_bias[...] = g_c
            g_e = np.einsum("fm,fmq->q", g_c, params.head_weights)
            g_q1, g_q2 = quantum_features_vjp(params, feats, g_e)
        else:
            g_q1 = None
            g_q2 = np.zeros_like(params.qnn2.angles)
            g_e_sets = {}
            for (name, f, order), w in cotangents.items():
                basis, feats = bases[name], tape["features"][name]
                g_e_sets[name] = g_e_sets.get(name, 0.0) + w[:, None] * tape[name, f, order]
                for q in range(params.qnn2.n_qubits):
                    grads.head_weights[f, :, q] += basis.rmatvec(order, w * feats.e[:, q])
                grads.head_bias[f] += basis.rmatvec(order, w)
                if not any(order):
                    grads.solution_bias[f] += np.sum(w)
            for name, g_e in g_e_sets.items():
                a, b = quantum_features_vjp(params, tape["features"][name], g_e)
                g_q2 += b
                if a is not None:
                    g_q1 = a if g_q1 is None else g_q1 + a
        if g_q1 is not None:
            grads.qnn1.angles[...] = g_q1
        grads.qnn2.angles[...] = g_q2
        return grads


def save_checkpoint(path, archs, params_list, seed, extra=None):
    """JSON checkpoint: architecture descriptors, flat parameters, seed.

    Floats are written with ``repr`` precision so loading is bit-exact.
    """
    payload = {
        "version": CHECKPOINT_VERSION,
        "seed": int(seed),
        "architectures": [asdict(a) for a in archs],
        "parameters": [p.to_vector().tolist() for p in params_list],
    }
    if extra:
        payload["extra"] = extra
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(payload))
    tmp.replace(path)


def load_checkpoint(path):
    """Inverse of ``save_checkpoint``: (architectures, params_list, seed, extra)."""
    payload = json.loads(Path(path).read_text())
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ConfigurationError(f"unsupported checkpoint version {payload.get('version')!r}")
    archs = [Architecture(**a) for a in payload["architectures"]]
    params = []
    for arch, vec in zip(archs, payload["parameters"]):
        template = init_params(arch, 0)
        params.append(template.with_vector(np.array(vec, dtype=np.float64)))
    return archs, params, payload["seed"], payload.get("extra", {})
