"""
Point sampling, the composite physics-informed loss and its gradient, Adam,
the step learning-rate schedule, and the per-seed training loop.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .config import TrainConfig
from .errors import ConfigurationError, TrainingError
from .metrics import relative_l2, relative_linf
from .model import Architecture, WaveletQNN, init_params
from .problems import COMPONENTS, Problem, make_problem, requests_for, residual_and_vjp
from .wavelet import basis_matrices, build_family_2d, resolution_range

HISTORY_COLUMNS = (
    "epoch", "lr", "loss_total", "loss_pde", "loss_ic", "loss_bc", "loss_interface", "val_rel_l2", "val_rel_linf",
)
PER_POINT_CHUNK = 256  # probes per batch when per-point features are evaluated for prediction


# --------------------------------------------------------------------------- sampling


@dataclass
class PointSets:
    """Training sets keyed (subdomain, name) plus the validation grid."""

    sets: dict
    validation: np.ndarray  # (gx * gy, 2), x-major
    grid_shape: tuple

    def __getitem__(self, key):
        return self.sets[key]


def _grid_split(n):
    # largest divisor of n not above sqrt(n): 8192 -> 64 x 128
    a = int(math.isqrt(n))
    while n % a:
        a -= 1
    return a, n // a


def _uniform_box(rng, lower, upper, n):
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    return lower + (upper - lower) * rng.random((n, 2))


def _cell_centers(lower, upper, n):
    nx, ny = _grid_split(n)
    xs = lower[0] + (np.arange(nx) + 0.5) * (upper[0] - lower[0]) / nx
    ys = lower[1] + (np.arange(ny) + 0.5) * (upper[1] - lower[1]) / ny
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def _segment(rng, lower, upper, dim, value, n):
    other = 1 - dim
    pts = np.empty((n, 2))
    pts[:, dim] = value
    pts[:, other] = lower[other] + (upper[other] - lower[other]) * rng.random(n)
    return pts


def validation_grid(problem: Problem, shape=(256, 256)) -> np.ndarray:
    """Uniform tensor grid over the whole domain, closed ends included, x-major."""
    lo, hi = problem.domain
    gx, gy = np.meshgrid(np.linspace(lo[0], hi[0], shape[0]), np.linspace(lo[1], hi[1], shape[1]), indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def sample_points(config: TrainConfig, seed: int, problem: Problem | None = None) -> PointSets:
    """Fixed training sets for one seed.

    Every subdomain gets its own N_c, N_b and N_0 points; boundary points are
    split as evenly as possible over that subdomain's boundary segments. The
    interface set is shared between the two sides.
    """
    problem = problem or make_problem(config.problem.name, config.problem.params)
    pc = config.points
    if pc.n_collocation < 1:
        raise ConfigurationError("n_collocation must be at least 1")
    rng = np.random.default_rng([seed, 0x5EED])
    sets = {}
    for sub, (lower, upper) in enumerate(problem.subdomains):
        lower, upper = np.asarray(lower, float), np.asarray(upper, float)
        if pc.sampling == "grid":
            sets[sub, "collocation"] = _cell_centers(lower, upper, pc.n_collocation)
        elif pc.sampling == "uniform":
            sets[sub, "collocation"] = _uniform_box(rng, lower, upper, pc.n_collocation)
        else:
            raise ConfigurationError(f"unknown sampling strategy {pc.sampling!r}")
        segments = problem.boundary_segments[sub]
        base, extra = divmod(pc.n_boundary, len(segments))
        sets[sub, "boundary"] = np.concatenate(
            [_segment(rng, lower, upper, dim, value, base + (i < extra)) for i, (dim, value) in enumerate(segments)]
        )
        if problem.has_initial:
            sets[sub, "initial"] = _segment(rng, lower, upper, 1, lower[1], pc.n_initial)
    if problem.interface is not None:
        dim, value = problem.interface
        lo, hi = problem.domain
        shared = _segment(rng, lo, hi, dim, value, pc.n_interface)
        for sub in range(len(problem.subdomains)):
            sets[sub, "interface"] = shared
    shape = tuple(pc.validation_grid)
    return PointSets(sets, validation_grid(problem, shape), shape)


# --------------------------------------------------------------------------- loss


@dataclass
class LossBreakdown:
    """Weighted loss components; ``total`` is their sum."""

    pde: float = 0.0
    ic: float = 0.0
    bc: float = 0.0
    interface: float = 0.0

    @property
    def total(self) -> float:
        return self.pde + self.ic + self.bc + self.interface

    def as_dict(self) -> dict:
        return {"total": self.total, **{c: getattr(self, c) for c in COMPONENTS}}


def architectures(config: TrainConfig, problem: Problem):
    """(Architecture, wavelet family) for every subdomain."""
    ac = config.architecture
    out = []
    for lower, upper in problem.subdomains:
        family = build_family_2d(
            (lower[0], upper[0]), resolution_range(*ac.resolutions["x"]),
            (lower[1], upper[1]), resolution_range(*ac.resolutions["y"]),
        )
        arch = Architecture(
            n_coefficients=family.size, q1=ac.q1, l1=ac.l1, q2=ac.q2, l2=ac.l2,
            n_fields=len(problem.fields), use_qnn1=ac.use_qnn1, encoding_axis=ac.encoding_axis,
        )
        out.append((arch, family))
    return out


class LossBundle:
    """Problem, residual descriptors, networks and precomputed basis matrices.

    Everything that stays fixed over training lives here so an epoch is just
    ``total_loss(params, bundle)``.
    """

    def __init__(self, problem: Problem, points: PointSets, arch_families, mode="global", truncate=None,
                 cache_dir=None):
        self.problem = problem
        self.points = points
        self.residuals = problem.build_residuals(points.sets)
        self.models = [
            WaveletQNN(arch, family, lower, upper, mode)
            for (arch, family), (lower, upper) in zip(arch_families, problem.subdomains)
        ]
        self.requests = {sub: {} for sub in range(len(self.models))}
        for (sub, name), reqs in requests_for(self.residuals).items():
            self.requests[sub][name] = reqs
        self.truncate = truncate
        self.bases = {}
        for sub, reqs in self.requests.items():
            self.bases[sub] = {
                name: basis_matrices(
                    self.models[sub].family, points[sub, name], sorted({o for _, o in r}), truncate, cache_dir
                )
                for name, r in reqs.items()
            }
        self._validation = None

    @classmethod
    def from_config(cls, config: TrainConfig, seed: int, cache_dir=None) -> "LossBundle":
        problem = make_problem(config.problem.name, config.problem.params)
        points = sample_points(config, seed, problem)
        return cls(problem, points, architectures(config, problem), config.architecture.coefficient_mode,
                   config.architecture.truncate, cache_dir)

    def init_params(self, seed):
        # subdomain 0 uses the bare seed so single-domain runs match init_params(arch, seed)
        return [init_params(m.arch, seed if sub == 0 else [seed, sub]) for sub, m in enumerate(self.models)]

    def field_values(self, params_list):
        values, tapes = {}, []
        for sub, model in enumerate(self.models):
            vals, tape = model.evaluate(params_list[sub], self.bases[sub], self.requests[sub])
            tapes.append(tape)
            for (name, f, order), v in vals.items():
                values[sub, name, f, order] = v
        return values, tapes

    # -- prediction on arbitrary points

    def predict(self, params_list, points, f=0, sub=None) -> np.ndarray:
        """Field ``f`` at ``points``; each point uses the network of its subdomain."""
        points = np.asarray(points, dtype=np.float64)
        subs = self.problem.subdomain_of(points) if sub is None else np.full(len(points), sub)
        out = np.empty(len(points))
        for s, model in enumerate(self.models):
            idx = np.flatnonzero(subs == s)
            if idx.size:
                out[idx] = self._predict_sub(model, params_list[s], points[idx], f)
        return out

    def _predict_sub(self, model, params, pts, f):
        if model.mode == "global":
            basis = basis_matrices(model.family, pts, [(0, 0)], self.truncate)
            vals, _ = model.evaluate(params, {"p": basis}, {"p": [(f, (0, 0))]})
            return vals["p", f, (0, 0)]
        out = []
        for start in range(0, len(pts), PER_POINT_CHUNK):
            chunk = pts[start : start + PER_POINT_CHUNK]
            basis = basis_matrices(model.family, chunk, [(0, 0)], self.truncate)
            vals, _ = model.evaluate(params, {"p": basis}, {"p": [(f, (0, 0))]})
            out.append(vals["p", f, (0, 0)])
        return np.concatenate(out)

    def validation_errors(self, params_list) -> dict:
        """{field name: (relative L2, relative L-infinity)} on the validation grid."""
        grid = self.points.validation
        if self._validation is None:
            self._validation = [self.problem.exact(f, grid) for f in range(len(self.problem.fields))]
        out = {}
        for f, name in enumerate(self.problem.fields):
            pred = self.predict(params_list, grid, f)
            ref = self._validation[f]
            out[name] = (relative_l2(pred, ref), relative_linf(pred, ref))
        return out


def total_loss(params_list, bundle: LossBundle, weights=None, epoch=None, with_grad=True):
    """Composite loss and, optionally, its gradient for every subdomain network.

    Returns (LossBreakdown, [ModelParams gradient per subdomain] or None).
    """
    weights = weights or {}
    values, tapes = bundle.field_values(params_list)
    evaluation, cotangents = residual_and_vjp(bundle.residuals, values, weights)
    breakdown = LossBreakdown(**{c: weights.get(c, 1.0) * evaluation.losses[c] for c in COMPONENTS})
    if not np.isfinite(breakdown.total):
        bad = [c for c in COMPONENTS if not np.isfinite(getattr(breakdown, c))]
        raise TrainingError(f"non-finite loss in component(s) {', '.join(bad)}", epoch)
    if not with_grad:
        return breakdown, None
    grads = []
    for sub, model in enumerate(bundle.models):
        cots = {(name, f, order): w for (s, name, f, order), w in cotangents.items() if s == sub}
        grads.append(model.pullback(params_list[sub], bundle.bases[sub], tapes[sub], cots))
    return breakdown, grads


# --------------------------------------------------------------------------- optimizer


@dataclass
class OptimizerState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, size, **hyper):
        return cls(np.zeros(size), np.zeros(size), **hyper)


def adam_step(params, grads, state: OptimizerState, lr: float, epoch=None):
    """One bias-corrected Adam update on flat vectors; returns (params, state)."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ConfigurationError(f"shape mismatch: params {params.shape}, grads {grads.shape}, state {state.m.shape}")
    if not np.all(np.isfinite(grads)):
        raise TrainingError(f"non-finite gradient ({np.count_nonzero(~np.isfinite(grads))} entries)", epoch)
    step = state.step + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grads
    v = state.beta2 * state.v + (1 - state.beta2) * grads * grads
    m_hat = m / (1 - state.beta1**step)
    v_hat = v / (1 - state.beta2**step)
    new = params - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new, OptimizerState(m, v, step, state.beta1, state.beta2, state.eps)


@dataclass(frozen=True)
class LRSchedule:
    initial: float
    milestones: tuple = ()
    decay: float = 0.1
    min_lr: float = 1e-5

    @classmethod
    def from_config(cls, config: TrainConfig):
        t = config.training
        return cls(t.lr, tuple(t.milestones), t.decay, t.min_lr)


def lr_at_epoch(schedule: LRSchedule, epoch: int) -> float:
    """Initial rate times decay**(milestones passed), floored at ``min_lr``."""
    if epoch < 0:
        raise ConfigurationError(f"epoch must be non-negative, got {epoch}")
    passed = sum(1 for m in schedule.milestones if epoch >= m)
    return max(schedule.initial * schedule.decay**passed, schedule.min_lr)


# --------------------------------------------------------------------------- loop


@dataclass
class SeedResult:
    seed: int
    history: list  # dicts keyed by HISTORY_COLUMNS
    errors: dict  # field -> {"rel_l2": ..., "rel_linf": ...}
    wall_time: float
    n_parameters: int
    params: list = field(repr=False, default_factory=list)
    failed: bool = False
    message: str = ""
    epochs_completed: int = 0


def train(config: TrainConfig, seed: int, bundle: LossBundle | None = None, progress=None) -> SeedResult:
    """Train every subdomain network for one seed.

    A non-finite loss or gradient stops the run; the result then carries the
    partial history, the last finite parameters and ``failed=True``.
    """
    start = time.perf_counter()
    bundle = bundle or LossBundle.from_config(config, seed)
    params = bundle.init_params(seed)
    n_params = sum(p.size for p in params)
    schedule = LRSchedule.from_config(config)
    weights = config.training.loss_weights
    stride, val_stride = config.output.history_stride, config.output.val_stride
    n_sub = len(params)
    alternating = config.training.subdomain_updates == "alternating" and n_sub > 1
    states = [OptimizerState.zeros(p.size) for p in params]
    epochs = config.training.epochs
    history, failed, message, done = [], False, "", 0
    for epoch in range(epochs):
        lr = lr_at_epoch(schedule, epoch)
        try:
            breakdown, grads = total_loss(params, bundle, weights, epoch)
            record = epoch % stride == 0 or epoch == epochs - 1
            if record:
                row = {"epoch": epoch, "lr": lr, **{f"loss_{k}": v for k, v in breakdown.as_dict().items()}}
                row["val_rel_l2"] = row["val_rel_linf"] = float("nan")
                if val_stride and epoch % val_stride == 0:
                    errs = bundle.validation_errors(params)
                    row["val_rel_l2"] = float(np.mean([e[0] for e in errs.values()]))
                    row["val_rel_linf"] = float(np.mean([e[1] for e in errs.values()]))
                history.append(row)
                if progress is not None:
                    progress(row)
            updated = []
            for sub in range(n_sub):
                if alternating and epoch % n_sub != sub:
                    updated.append((params[sub], states[sub]))
                    continue
                vec, state = adam_step(params[sub].to_vector(), grads[sub].to_vector(), states[sub], lr, epoch)
                updated.append((params[sub].with_vector(vec), state))
        except TrainingError as exc:
            failed, message = True, str(exc)
            break
        params = [p for p, _ in updated]
        states = [s for _, s in updated]
        done = epoch + 1
    errors = {}
    if not failed:
        errs = bundle.validation_errors(params)
        errors = {name: {"rel_l2": l2, "rel_linf": linf} for name, (l2, linf) in errs.items()}
        if not all(np.isfinite(v) for e in errors.values() for v in e.values()):
            failed, message = True, "non-finite validation error after training"
    return SeedResult(
        seed=seed, history=history, errors=errors, wall_time=time.perf_counter() - start,
        n_parameters=n_params, params=params, failed=failed, message=message, epochs_completed=done,
    )
