import datetime as dt
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from denguerisk.errors import ModelInvalidError
from denguerisk.estimation import CaseSeries
from denguerisk.risk import (EXCLUDED, LabeledWeek, RiskModel, default_risk_model, label_weeks,
                             load_model, loss_and_grad, predict, risk_band, save_model, train,
                             training_set, weekly_features)

START = dt.date(2021, 1, 4)


def _weeks(X, y):
    return [LabeledWeek(float(a), float(b), int(c)) for (a, b), c in zip(X, y)]


def test_labels_increasing_and_constant():
    up = label_weeks(np.arange(10, 30))
    assert np.all(up[1:-1] == 1) and up[0] == EXCLUDED
    assert np.all(label_weeks(np.full(12, 20)) == EXCLUDED)


def test_labels_exclude_low_activity():
    labels = label_weeks([0, 0, 1, 0, 2, 0, 1])
    assert np.all(labels == EXCLUDED)
    with pytest.raises(ValueError):
        label_weeks([1, 2, 3, 4])


def test_label_flip_near_peak():
    w = np.arange(40)
    counts = np.round(200 * np.exp(-0.5 * ((w - 17) / 5) ** 2)).astype(int)
    labels = label_weeks(counts)
    flip = int(np.argmax((labels[:-1] == 1) & (labels[1:] == 0))) + 1
    peak = int(np.argmax(np.convolve(counts, np.ones(3) / 3, mode="same")))
    assert abs(flip - peak) <= 1


def test_features_read_on_week_start():
    r0 = np.arange(30.0)
    vf = 2 * np.arange(30.0)
    f = weekly_features(START, r0, vf, [START, START + dt.timedelta(days=14)])
    np.testing.assert_array_equal(f, [[0, 0], [14, 28]])
    with pytest.raises(ValueError):
        weekly_features(START, r0, vf, [START + dt.timedelta(days=30)])


def test_training_set_drops_excluded():
    cs = CaseSeries("x", START, [5, 8, 12, 20, 20, 20, 15, 9])
    data = training_set(cs, START, np.ones(60), np.ones(60))
    assert len(data) == int(np.sum(label_weeks(cs) != EXCLUDED))
    assert {d.label for d in data} == {0, 1}


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 2))
    y = (rng.random(40) < 0.5).astype(float)
    w = rng.normal(size=3)
    _, g = loss_and_grad(w, X, y)
    h = 1e-5
    fd = np.array([(loss_and_grad(w + h * e, X, y)[0] - loss_and_grad(w - h * e, X, y)[0]) / (2 * h)
                   for e in np.eye(3)])
    assert np.max(np.abs(fd - g)) <= 1e-6 * max(np.max(np.abs(g)), 1e-3)


def test_separable_data_is_learned():
    rng = np.random.default_rng(1)
    X = rng.uniform(0, 4, size=(400, 2))
    s = X[:, 0] + X[:, 1] - 4
    keep = np.abs(s) > 0.2
    X, y = X[keep], (s[keep] > 0).astype(int)
    model = train(_weeks(X, y), epochs=3000)
    acc = np.mean((predict(model, X[:, 0], X[:, 1]) > 0.5) == (y == 1))
    assert acc >= 0.99


def test_loss_nonincreasing_with_small_rate():
    rng = np.random.default_rng(2)
    X = rng.uniform(0, 4, size=(200, 2))
    y = (rng.random(200) < 1 / (1 + np.exp(-(X[:, 0] - 2)))).astype(int)
    _, hist = train(_weeks(X, y), epochs=300, learning_rate=1e-2, return_history=True)
    assert np.all(np.diff(hist) <= 1e-15)


def test_training_is_deterministic_and_refuses_one_class():
    X = np.array([[0.5, 1.0], [2.0, 3.0], [1.0, 0.2], [2.5, 1.0]])
    a = train(_weeks(X, [0, 1, 0, 1]), epochs=100)
    b = train(_weeks(X, [0, 1, 0, 1]), epochs=100)
    assert a == b
    with pytest.raises(ValueError, match="both labels"):
        train(_weeks(X, [1, 1, 1, 1]))


def test_compensating_boundary_has_negative_slope():
    # outbreaks where either R0 or abundance is high enough
    rng = np.random.default_rng(3)
    R0 = rng.uniform(0, 3, 1500)
    V = rng.uniform(0, 6, 1500)
    p = 1 / (1 + np.exp(-3 * (R0 + 0.5 * V - 2.5)))
    y = (rng.random(1500) < p).astype(int)
    m = train(_weeks(np.column_stack([R0, V]), y))
    assert m.w1 > 0 and m.w2 > 0
    # boundary dV/dR0 in raw units
    slope = -(m.w1 / m.scales[0]) / (m.w2 / m.scales[1])
    assert slope < 0
    assert slope == pytest.approx(-2.0, rel=0.25)


def test_zero_model_and_range():
    z = RiskModel(0.0, 0.0, 0.0)
    np.testing.assert_array_equal(predict(z, [0, 3, 1e9], [5, 0, 2]), 0.5)
    huge = RiskModel(0.0, 1e3, 1e3)
    assert 0.0 < predict(huge, -1e6, -1e6) < predict(huge, 1e6, 1e6) < 1.0


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 5))
def test_risk_monotone_in_abundance_for_positive_w2(r0, v, dv):
    m = RiskModel(0.3, 1.1, 0.7, (1.0, 2.0), (0.5, 1.5))
    assert predict(m, r0, v + dv) >= predict(m, r0, v)


def test_bands():
    assert list(risk_band([0.0, 0.39, 0.4, 0.5, 0.6, 0.61, 1.0])) == [
        "low", "low", "indeterminate", "indeterminate", "indeterminate", "high", "high"]
    assert risk_band(0.7) == "high"


def test_model_file_round_trip(tmp_path):
    m = RiskModel(0.1, 2.0, -0.5, (1.0, 3.0), (0.5, 2.0), {"note": "x"})
    p = tmp_path / "m.json"
    save_model(m, p)
    back = load_model(p)
    assert back == m and back.metadata == {"note": "x"}
    d = json.loads(p.read_text())
    d["schema_version"] = 99
    p.write_text(json.dumps(d))
    with pytest.raises(ModelInvalidError, match="schema_version"):
        load_model(p)
    p.write_text("{not json")
    with pytest.raises(ModelInvalidError):
        load_model(p)
    with pytest.raises(ModelInvalidError):
        RiskModel(0, 1, 1, scales=(0.0, 1.0))


def test_default_model_ships():
    m = default_risk_model()
    assert m.metadata["train_accuracy"] > 0.7
    assert predict(m, 0.0, 0.0) < 0.4
