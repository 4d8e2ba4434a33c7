import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wpiqnn import training
from wpiqnn.config import TrainConfig
from wpiqnn.errors import ConfigurationError, TrainingError
from wpiqnn.report import csv_text
from wpiqnn.gradcheck import loss_gradient_check, toy_config
from wpiqnn.training import (
    LossBreakdown,
    LossBundle,
    LRSchedule,
    OptimizerState,
    adam_step,
    lr_at_epoch,
    sample_points,
    total_loss,
    train,
)
from wpiqnn.training import HISTORY_COLUMNS


def make_config(problem="heat", params=None, **over):
    data = {
        "problem": {"name": problem, "params": params or {}},
        "architecture": {"resolutions": {"x": [0, 0], "y": [-1, 0]}, "q1": 2, "l1": 1, "q2": 3, "l2": 1},
        "points": {"n_collocation": 64, "n_boundary": 20, "n_initial": 20, "n_interface": 10,
                   "validation_grid": [16, 16]},
        "training": {"epochs": 5, "lr": 1e-2},
        "seeds": [0],
        "output": {},
    }
    for section, values in over.items():
        data[section].update(values)
    return TrainConfig.from_dict(data)


# ---------------------------------------------------------------- sampling


def test_sample_counts():
    cfg = make_config(points={"n_collocation": 2**13, "n_boundary": 1000, "n_initial": 500})
    pts = sample_points(cfg, 0)
    assert pts[0, "collocation"].shape == (8192, 2)
    assert pts[0, "boundary"].shape == (1000, 2)
    assert pts[0, "initial"].shape == (500, 2)
    assert pts.validation.shape == (16 * 16, 2)


def test_samples_respect_geometry():
    cfg = make_config("maxwell", {"medium": "heterogeneous"})
    pts = sample_points(cfg, 1)
    for sub, (lo, hi) in enumerate([((0, 0), (0.5, 1)), ((0.5, 0), (1, 1))]):
        for name in ("collocation", "boundary", "initial", "interface"):
            p = pts[sub, name]
            assert np.all(p >= np.array(lo) - 1e-15) and np.all(p <= np.array(hi) + 1e-15), (sub, name)
        assert np.all(pts[sub, "initial"][:, 1] == 0)
    assert np.all(pts[0, "boundary"][:, 0] == 0) and np.all(pts[1, "boundary"][:, 0] == 1)
    assert pts[0, "interface"] is pts[1, "interface"]
    assert np.all(pts[0, "interface"][:, 0] == 0.5)


def test_boundary_split_over_segments():
    cfg = make_config(points={"n_boundary": 21})
    b = sample_points(cfg, 0)[0, "boundary"]
    assert np.sum(b[:, 0] == -1) == 11 and np.sum(b[:, 0] == 1) == 10
    helm = sample_points(make_config("helmholtz", points={"n_boundary": 400}), 0)
    assert (0, "initial") not in helm.sets
    b = helm[0, "boundary"]
    assert np.sum(np.isclose(np.abs(b), 1.0).any(axis=1)) == 400


def test_sampling_is_deterministic():
    cfg = make_config("maxwell", {"medium": "heterogeneous"})
    a, b, c = sample_points(cfg, 5), sample_points(cfg, 5), sample_points(cfg, 6)
    assert all(np.array_equal(a.sets[k], b.sets[k]) for k in a.sets)
    assert not np.array_equal(a[0, "collocation"], c[0, "collocation"])
    assert np.array_equal(a.validation, c.validation)


def test_grid_sampling():
    cfg = make_config(points={"n_collocation": 8192, "sampling": "grid"})
    col = sample_points(cfg, 0)[0, "collocation"]
    assert col.shape == (8192, 2)
    assert len(np.unique(col[:, 0])) * len(np.unique(col[:, 1])) == 8192
    assert np.all(np.abs(col[:, 0]) < 1) and np.all((col[:, 1] > 0) & (col[:, 1] < 1))


# ---------------------------------------------------------------- loss


def zero_output(params):
    for p in params:
        p.head_weights[...] = 0
        p.head_bias[...] = 0
        p.solution_bias[...] = 0
    return params


def test_zero_prediction_heat_loss():
    cfg = make_config(params={"eps": 0.5})
    bundle = LossBundle.from_config(cfg, 0)
    loss, _ = total_loss(zero_output(bundle.init_params(0)), bundle)
    f = bundle.problem.forcing(bundle.points[0, "collocation"])
    u0 = bundle.problem.initial(bundle.points[0, "initial"][:, 0])
    assert loss.bc == 0.0
    assert loss.pde == pytest.approx(np.mean(f**2), rel=1e-14)
    assert loss.ic == pytest.approx(np.mean(u0**2), rel=1e-14)
    assert loss.interface == 0.0


def test_breakdown_total_is_sum():
    b = LossBreakdown(pde=0.1, ic=0.2, bc=0.3, interface=0.4)
    assert abs(b.total - 1.0) < 1e-12
    assert b.as_dict()["total"] == b.total


def test_loss_weights_scale_components():
    cfg = make_config()
    bundle = LossBundle.from_config(cfg, 0)
    params = bundle.init_params(0)
    plain, _ = total_loss(params, bundle)
    weighted, _ = total_loss(params, bundle, {"pde": 2.0, "bc": 0.0})
    assert weighted.pde == pytest.approx(2 * plain.pde) and weighted.bc == 0 and weighted.ic == plain.ic


CASES = [
    ("heat", {"eps": 0.5}),
    ("helmholtz", {"b2": 2.0}),
    ("klein_gordon", {"a": 5.0}),
    ("maxwell", {"medium": "homogeneous"}),
    ("maxwell", {"medium": "heterogeneous"}),
]


@pytest.mark.parametrize("mode", ["global", "per_point"])
@pytest.mark.parametrize("name,params", CASES)
def test_loss_gradient_matches_fd(name, params, mode):
    cfg = toy_config(make_config(name, params, architecture={"coefficient_mode": mode}))
    assert max(loss_gradient_check(cfg, seed=2)) < 1e-5


def test_toy_config_family_size():
    bundle = LossBundle.from_config(toy_config(make_config()), 0)
    assert bundle.models[0].family.size == 10
    assert bundle.models[0].arch.q2 == 5
    assert len(bundle.points[0, "collocation"]) == 32


def test_non_finite_loss_raises_with_epoch():
    bundle = LossBundle.from_config(make_config(), 0)
    params = bundle.init_params(0)
    params[0].solution_bias[0] = np.inf
    with pytest.raises(TrainingError, match="epoch 7"):
        total_loss(params, bundle, epoch=7)


# ---------------------------------------------------------------- Adam


def test_adam_first_step():
    new, state = adam_step(np.array([0.5]), np.array([1.0]), OptimizerState.zeros(1), 1e-3)
    # m_hat = g, v_hat = g^2 on step one, so the move is lr * g / (|g| + eps)
    assert 0.5 - new[0] == pytest.approx(1e-3 / (1 + 1e-8), rel=1e-12)
    assert state.step == 1


def test_adam_matches_reference_loop():
    rng = np.random.default_rng(0)
    p = rng.normal(size=4)
    state = OptimizerState.zeros(4)
    m = v = np.zeros(4)
    ref = p.copy()
    for k in range(1, 6):
        g = rng.normal(size=4)
        p, state = adam_step(p, g, state, 0.01)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref = ref - 0.01 * (m / (1 - 0.9**k)) / (np.sqrt(v / (1 - 0.999**k)) + 1e-8)
    assert np.allclose(p, ref, rtol=1e-14, atol=1e-15)


def test_adam_zero_gradient():
    state = OptimizerState(np.ones(3), np.ones(3), step=4)
    p = np.array([1.0, 2.0, 3.0])
    new, nxt = adam_step(p, np.zeros(3), state, 0.1)
    assert np.allclose(nxt.m, 0.9) and np.allclose(nxt.v, 0.999)
    zero_state = OptimizerState.zeros(3)
    unchanged, _ = adam_step(p, np.zeros(3), zero_state, 0.1)
    assert np.array_equal(unchanged, p)


def test_adam_deterministic_and_checked():
    rng = np.random.default_rng(1)
    p, g = rng.normal(size=5), rng.normal(size=5)
    state = OptimizerState(rng.random(5), rng.random(5), 3)
    a, sa = adam_step(p, g, state, 0.01)
    b, sb = adam_step(p, g, state, 0.01)
    assert np.array_equal(a, b) and np.array_equal(sa.m, sb.m) and np.array_equal(sa.v, sb.v)
    with pytest.raises(TrainingError):
        adam_step(p, np.array([1, np.nan, 0, 0, 0.0]), state, 0.01)
    with pytest.raises(ConfigurationError):
        adam_step(p, g[:3], state, 0.01)


# ---------------------------------------------------------------- schedule


def test_lr_schedule_examples():
    sched = LRSchedule(1e-2, (10_000, 40_000, 80_000), 0.1, 1e-5)
    assert lr_at_epoch(sched, 0) == 1e-2
    assert lr_at_epoch(sched, 9_999) == 1e-2
    assert lr_at_epoch(sched, 40_000) == pytest.approx(1e-4)
    assert lr_at_epoch(sched, 200_000) == pytest.approx(1e-5, rel=1e-12)
    with pytest.raises(ConfigurationError):
        lr_at_epoch(sched, -1)


@given(st.lists(st.integers(1, 10**6), max_size=5, unique=True), st.floats(1e-5, 1.0), st.integers(0, 10**6),
       st.integers(0, 10**6))
def test_lr_is_monotone(milestones, lr, e1, e2):
    sched = LRSchedule(lr, tuple(sorted(milestones)), 0.1, 1e-6)
    lo, hi = sorted((e1, e2))
    assert lr_at_epoch(sched, hi) <= lr_at_epoch(sched, lo)
    assert lr_at_epoch(sched, hi) >= min(lr, 1e-6)


# ---------------------------------------------------------------- training loop


def test_single_epoch_report():
    cfg = make_config(training={"epochs": 1})
    result = train(cfg, 0)
    assert len(result.history) == 1 and not result.failed
    assert result.history[0]["epoch"] == 0
    assert set(result.errors["u"]) == {"rel_l2", "rel_linf"}


def test_training_is_deterministic():
    cfg = make_config("maxwell", {"medium": "heterogeneous"}, training={"epochs": 6})
    a, b = train(cfg, 3), train(cfg, 3)
    # compare as text so NaN placeholders match
    assert csv_text(HISTORY_COLUMNS, [[h[c] for c in HISTORY_COLUMNS] for h in a.history]) == \
        csv_text(HISTORY_COLUMNS, [[h[c] for c in HISTORY_COLUMNS] for h in b.history])
    for p, q in zip(a.params, b.params):
        assert np.array_equal(p.to_vector(), q.to_vector())


def test_history_stride_and_validation():
    cfg = make_config(training={"epochs": 10}, output={"history_stride": 3, "val_stride": 6})
    result = train(cfg, 0)
    assert [h["epoch"] for h in result.history] == [0, 3, 6, 9]
    assert [np.isnan(h["val_rel_l2"]) for h in result.history] == [False, True, False, True]
    for h in result.history:
        assert abs(h["loss_total"] - (h["loss_pde"] + h["loss_ic"] + h["loss_bc"] + h["loss_interface"])) < 1e-12


def test_loss_decreases_on_small_problem():
    cfg = make_config(training={"epochs": 60})
    result = train(cfg, 0)
    assert result.history[-1]["loss_total"] < 0.7 * result.history[0]["loss_total"]


def test_divergence_marks_seed_failed(monkeypatch):
    real = training.total_loss

    def flaky(params, bundle, weights=None, epoch=None, with_grad=True):
        if epoch == 3:
            raise TrainingError("non-finite loss in component(s) pde", epoch)
        return real(params, bundle, weights, epoch, with_grad)

    monkeypatch.setattr(training, "total_loss", flaky)
    result = train(make_config(training={"epochs": 8}), 0)
    assert result.failed and "epoch 3" in result.message
    assert len(result.history) == 3 and result.epochs_completed == 3
    assert result.errors == {}


def test_alternating_updates_one_subdomain_per_epoch():
    cfg = make_config("maxwell", {"medium": "heterogeneous"},
                      training={"epochs": 1, "subdomain_updates": "alternating"})
    bundle = LossBundle.from_config(cfg, 0)
    start = bundle.init_params(0)
    result = train(cfg, 0, bundle)
    assert not np.array_equal(result.params[0].to_vector(), start[0].to_vector())
    assert np.array_equal(result.params[1].to_vector(), start[1].to_vector())


def test_prediction_routes_points_to_subdomains():
    cfg = make_config("maxwell", {"medium": "heterogeneous"})
    bundle = LossBundle.from_config(cfg, 0)
    params = bundle.init_params(0)
    pts = np.array([[0.2, 0.5], [0.8, 0.5]])
    both = bundle.predict(params, pts, 0)
    assert both[0] == pytest.approx(bundle.predict(params, pts[:1], 0, sub=0)[0])
    assert both[1] == pytest.approx(bundle.predict(params, pts[1:], 0, sub=1)[0])
