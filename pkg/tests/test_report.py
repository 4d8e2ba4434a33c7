import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wpiqnn.config import TrainConfig
from wpiqnn.errors import AggregationError, MetricError
from wpiqnn.metrics import relative_l2, relative_linf
from wpiqnn.report import (
    RunReport,
    aggregate,
    csv_text,
    emit_fields,
    fmt,
    mean_std_text,
    read_history_csv,
    write_history_csv,
)
from wpiqnn.training import HISTORY_COLUMNS, LossBundle


def small_config(problem="heat", params=None):
    return TrainConfig.from_dict({
        "problem": {"name": problem, "params": params or {}},
        "architecture": {"resolutions": {"x": [0, 0], "y": [-1, -1]}, "q1": 2, "l1": 1, "q2": 5, "l2": 1},
        "points": {"n_collocation": 16, "n_boundary": 8, "n_initial": 8, "validation_grid": [8, 8]},
        "training": {"epochs": 2},
        "seeds": [0, 1],
    })


def entry(seed, l2, linf=None, failed=False):
    return {"seed": seed, "failed": failed, "message": "boom" if failed else "", "epochs_completed": 1,
            "wall_time": 0.5, "errors": {} if failed else {"u": {"rel_l2": l2, "rel_linf": linf or l2}},
            "history_file": None, "checkpoint_file": None}


# ---------------------------------------------------------------- metrics


def test_metric_hand_cases():
    ref = np.array([3.0, 4.0, 0.0, 0.0])
    assert relative_l2(ref, ref) == 0.0 and relative_linf(ref, ref) == 0.0
    assert relative_l2(np.zeros(4), ref) == 1.0
    assert relative_linf(np.zeros(4), ref) == 1.0
    # |e| = (0, 0, 0, 5): ||e|| / ||ref|| = 5/5, max|e| / max|ref| = 5/4
    pred = ref + np.array([0, 0, 0, 5.0])
    assert relative_l2(pred, ref) == 1.0 and relative_linf(pred, ref) == 1.25


def test_uniform_overshoot():
    ref = np.linspace(-2, 3, 11)
    assert relative_l2(1.1 * ref, ref) == pytest.approx(0.1, rel=1e-12)
    assert relative_linf(1.1 * ref, ref) == pytest.approx(0.1, rel=1e-12)


def test_single_spike():
    ref = np.ones(100)
    pred = ref.copy()
    pred[37] += 1.0
    assert relative_linf(pred, ref) == 1.0
    assert relative_l2(pred, ref) == pytest.approx(0.1)


def test_metric_errors():
    with pytest.raises(MetricError):
        relative_l2(np.ones(3), np.zeros(3))
    with pytest.raises(MetricError):
        relative_linf(np.ones(3), np.zeros(3))
    with pytest.raises(MetricError):
        relative_l2(np.ones(3), np.ones(4))


# tiny magnitudes underflow when squared in the reference loop
finite = st.floats(-1e3, 1e3, allow_nan=False).filter(lambda v: v == 0 or abs(v) > 1e-100)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=30), st.floats(1e-3, 1e3))
def test_metrics_match_loop_and_scale(pairs, scale):
    pred = np.array([p for p, _ in pairs])
    ref = np.array([r for _, r in pairs])
    if not np.any(ref):
        return
    l2 = math.sqrt(sum((p - r) ** 2 for p, r in pairs)) / math.sqrt(sum(r * r for r in ref))
    linf = max(abs(p - r) for p, r in pairs) / max(abs(r) for r in ref)
    assert relative_l2(pred, ref) == pytest.approx(l2, rel=1e-12, abs=1e-300)
    assert relative_linf(pred, ref) == pytest.approx(linf, rel=1e-12, abs=1e-300)
    assert relative_l2(scale * pred, scale * ref) == pytest.approx(l2, rel=1e-10, abs=1e-300)
    assert relative_linf(scale * pred, scale * ref) == pytest.approx(linf, rel=1e-10, abs=1e-300)


# ---------------------------------------------------------------- aggregation


def test_aggregate_two_seeds():
    agg = aggregate([entry(0, 1e-4), entry(1, 3e-4)])
    stats = agg["metrics"]["u"]["rel_l2"]
    assert stats["mean"] == pytest.approx(2e-4, rel=1e-14)
    assert stats["std"] == pytest.approx(math.sqrt(2) * 1e-4, rel=1e-14)
    assert agg["n_used"] == 2 and not agg["single_seed"]


def test_aggregate_three_seeds_text():
    agg = aggregate([entry(0, 1e-5), entry(1, 2e-5), entry(2, 3e-5)])
    stats = agg["metrics"]["u"]["rel_l2"]
    assert stats["std"] == pytest.approx(1e-5, rel=1e-12)
    assert stats["text"] == "2.00 ± 1.00 × 10^-5"


def test_aggregate_skips_failed_and_single_seed():
    agg = aggregate([entry(0, 1e-3), entry(4, 0, failed=True)])
    assert agg["n_failed"] == 1 and agg["failed_seeds"] == [4]
    assert agg["single_seed"] and agg["metrics"]["u"]["rel_l2"]["std"] == 0.0
    with pytest.raises(AggregationError):
        aggregate([entry(0, 0, failed=True), entry(1, 0, failed=True)])
    with pytest.raises(AggregationError):
        aggregate([])


@given(st.lists(st.floats(1e-8, 1.0), min_size=2, max_size=8), st.randoms())
def test_aggregate_permutation_invariant(values, rnd):
    entries = [entry(i, v) for i, v in enumerate(values)]
    shuffled = entries[:]
    rnd.shuffle(shuffled)
    assert aggregate(entries) == aggregate(shuffled)


def test_mean_std_text_exponent():
    assert mean_std_text(1.63e-5, 0.43e-5) == "1.63 ± 0.43 × 10^-5"
    assert mean_std_text(0.0, 0.0) == "0.00 ± 0.00"


# ---------------------------------------------------------------- serialization


def test_report_json_round_trip():
    cfg = small_config()
    report = RunReport.build(cfg, [entry(1, 2e-3), entry(0, 1e-3)], 123)
    assert [s["seed"] for s in report.seeds] == [0, 1]
    back = RunReport.from_json(report.to_json())
    assert back == report
    assert json.loads(report.to_json())["n_parameters"] == 123
    assert report.non_default_weights == {}


def test_csv_keeps_17_digits():
    vals = [1 / 3, math.pi * 1e-17, 2.0**-1074, 1e308, -0.1]
    text = csv_text(["v"], [[v] for v in vals])
    rows = list(csv.reader(text.splitlines()))[1:]
    assert [float(r[0]) for r in rows] == vals
    assert fmt(float("nan")) == "" and fmt(None) == "" and fmt(np.int64(7)) == "7"


def test_history_csv_round_trip(tmp_path):
    rows = [{c: float(i + k) for k, c in enumerate(HISTORY_COLUMNS)} for i in range(3)]
    for r in rows:
        r["epoch"] = int(r["epoch"])
    rows[1]["val_rel_l2"] = float("nan")
    path = tmp_path / "h.csv"
    write_history_csv(path, rows)
    back = read_history_csv(path)
    assert math.isnan(back[1]["val_rel_l2"])
    back[1]["val_rel_l2"] = rows[1]["val_rel_l2"] = 0.0
    assert back == rows
    assert not list(tmp_path.glob("*.tmp"))


# ---------------------------------------------------------------- field output


def test_emit_fields_heat(tmp_path):
    bundle = LossBundle.from_config(small_config(), 0)
    params = bundle.init_params(0)
    written = emit_fields(bundle, params, tmp_path, grid=(64, 64))
    names = {p.name for p in written}
    assert {"exact_u.csv", "pred_u.csv", "error_u.csv", "fields_u.svg", "sections_u.svg", "sections_u.csv"} <= names
    exact = np.loadtxt(tmp_path / "exact_u.csv", delimiter=",")
    pred = np.loadtxt(tmp_path / "pred_u.csv", delimiter=",")
    err = np.loadtxt(tmp_path / "error_u.csv", delimiter=",")
    assert exact.shape == pred.shape == err.shape == (64, 64)
    assert np.all(err >= 0) and np.allclose(err, np.abs(pred - exact), atol=1e-15)
    assert (tmp_path / "fields_u.svg").read_text().lstrip().startswith("<?xml")
    with open(tmp_path / "sections_u.csv") as fh:
        cuts = sorted({float(r["x"]) for r in csv.DictReader(fh)})
    assert cuts == [-0.75, 0.0, 0.5]


def test_helmholtz_midline_section_is_zero(tmp_path):
    bundle = LossBundle.from_config(small_config("helmholtz", {"b2": 2.0}), 0)
    emit_fields(bundle, bundle.init_params(0), tmp_path, grid=(16, 16), sections=[0.0])
    with open(tmp_path / "sections_u.csv") as fh:
        exact = [float(r["exact"]) for r in csv.DictReader(fh)]
    assert len(exact) == 16 and max(abs(e) for e in exact) == 0.0


def test_maxwell_writes_both_fields(tmp_path):
    bundle = LossBundle.from_config(small_config("maxwell", {"medium": "homogeneous"}), 0)
    written = emit_fields(bundle, bundle.init_params(0), tmp_path, grid=(8, 8), sections=[])
    assert {p.name for p in written} == {f"{k}_{f}.csv" for k in ("exact", "pred", "error") for f in ("E", "H")} | {
        "fields_E.svg", "fields_H.svg"}
