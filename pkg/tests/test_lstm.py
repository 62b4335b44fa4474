import math
from dataclasses import replace

import numpy as np
import pytest

from fracdiff_lstm.exceptions import ContractError, InsufficientDataError, TuningError
from fracdiff_lstm.fracdiff import apply_diff, frac_weights
from fracdiff_lstm.indicators import build_features
from fracdiff_lstm.lstm import (
    ModelSpec,
    TrainConfig,
    fit,
    predict_series,
    train_network,
    tune,
)
from fracdiff_lstm.lstm.network import (
    LstmCellParams,
    LstmNetwork,
    backward,
    cell_step,
    forward,
    load_checkpoint,
    save_checkpoint,
    weight_penalty,
)
from fracdiff_lstm.lstm.training import make_windows
from fracdiff_lstm.timeseries import PriceSeries, SplitSpec, log_transform


def scalar_sigmoid(z):
    return 1.0 / (1.0 + math.exp(-z))


def finite_difference(net, windows, targets, l2_rate, eps=1e-5):
    params = [p.copy() for p in net.parameters()]
    grads = []
    for k, p in enumerate(params):
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            for sign in (1, -1):
                trial = [q.copy() for q in params]
                trial[k][idx] += sign * eps
                net.set_parameters(trial)
                g[idx] += sign * backward(net, windows, targets, l2_rate)[0]
            g[idx] /= 2 * eps
        grads.append(g)
    net.set_parameters(params)
    return grads


# -- memory cell -------------------------------------------------------------


def test_zero_cell():
    params = LstmCellParams.zeros(3, 4)
    h, s, cache = cell_step(params, np.array([1.0, -2.0, 0.5]), np.zeros(4), np.zeros(4))
    assert np.all(cache.f == 0.5) and np.all(cache.i == 0.5) and np.all(cache.o == 0.5)
    assert np.all(cache.g == 0) and np.all(s == 0) and np.all(h == 0)


def test_saturated_forget_gate_keeps_memory():
    params = LstmCellParams.zeros(2, 3)
    params.b[:3] = 10.0
    s0 = np.array([0.7, -0.2, 1.5])
    _, s, _ = cell_step(params, np.ones(2), np.zeros(3), s0)
    assert s == pytest.approx(scalar_sigmoid(10.0) * s0, abs=1e-15)


def test_scalar_trace_oracle():
    wv = {"forget": 0.3, "input": -0.4, "candidate": 0.8, "output": 0.5}
    wh = {"forget": -0.2, "input": 0.6, "candidate": -0.7, "output": 0.1}
    b = {"forget": 0.1, "input": -0.3, "candidate": 0.2, "output": 0.05}
    params = LstmCellParams(
        [[wv[g]] for g in ("forget", "input", "candidate", "output")],
        [[wh[g]] for g in ("forget", "input", "candidate", "output")],
        [b[g] for g in ("forget", "input", "candidate", "output")],
    )
    h, s = 0.0, 0.0
    h_vec, s_vec = np.zeros(1), np.zeros(1)
    for v in (0.5, -1.0, 2.0, 0.25):
        f = scalar_sigmoid(wv["forget"] * v + wh["forget"] * h + b["forget"])
        i = scalar_sigmoid(wv["input"] * v + wh["input"] * h + b["input"])
        g = math.tanh(wv["candidate"] * v + wh["candidate"] * h + b["candidate"])
        o = scalar_sigmoid(wv["output"] * v + wh["output"] * h + b["output"])
        s = f * s + i * g
        h = o * math.tanh(s)
        h_vec, s_vec, _ = cell_step(params, np.array([v]), h_vec, s_vec)
        assert abs(h_vec[0] - h) < 1e-12 and abs(s_vec[0] - s) < 1e-12


def test_retention_over_100_steps():
    params = LstmCellParams.zeros(2, 2)
    params.b[:2] = 30.0  # forget gate at 1
    params.b[2:4] = -30.0  # input gate at 0
    s0 = np.array([0.9, -0.4])
    h, s = np.zeros(2), s0.copy()
    rng = np.random.default_rng(0)
    for _ in range(100):
        h, s, _ = cell_step(params, rng.standard_normal(2), h, s)
    assert np.max(np.abs(s - s0)) <= 1e-4


def test_gate_ranges(rng):
    params = LstmCellParams.initialize(4, 5, rng)
    _, _, c = cell_step(params, rng.standard_normal((16, 4)) * 3, rng.standard_normal((16, 5)), rng.standard_normal((16, 5)))
    for gate in (c.f, c.i, c.o):
        assert np.all((gate > 0) & (gate < 1))
    assert np.all(np.abs(c.g) < 1) and np.all(np.abs(c.tanh_s) < 1)


def test_cell_dimension_mismatch():
    with pytest.raises(ContractError):
        cell_step(LstmCellParams.zeros(3, 2), np.ones(4), np.zeros(2), np.zeros(2))
    with pytest.raises(ContractError):
        LstmCellParams(np.zeros((8, 3)), np.zeros((8, 3)), np.zeros(8))


# -- network -----------------------------------------------------------------


def test_zero_network_predicts_head_bias(rng):
    net = LstmNetwork.zeros(3, (4, 2))
    net.head_b = 0.37
    pred, _ = forward(net, rng.standard_normal((6, 10, 3)))
    assert np.all(pred == 0.37)


def test_train_equals_infer_without_dropout(rng):
    net = LstmNetwork.initialize(3, (5,), seed=1)
    x = rng.standard_normal((4, 7, 3))
    assert np.array_equal(forward(net, x, "train", seed=3)[0], forward(net, x, "infer")[0])


def test_train_mode_is_seeded(rng):
    net = LstmNetwork.initialize(3, (5, 4), dropout=0.3, recurrent_dropout=0.2, seed=1)
    x = rng.standard_normal((4, 7, 3))
    a = forward(net, x, "train", seed=9)[0]
    assert np.array_equal(a, forward(net, x, "train", seed=9)[0])
    assert not np.array_equal(a, forward(net, x, "infer")[0])


@pytest.mark.parametrize("case", range(20))
def test_gradient_check(case):
    rng = np.random.default_rng(100 + case)
    n_in = int(rng.integers(1, 4))
    hidden = tuple(int(h) for h in rng.integers(1, 4, size=int(rng.integers(1, 3))))
    net = LstmNetwork.initialize(n_in, hidden, seed=case)
    net.head_b = float(rng.standard_normal())
    windows = rng.standard_normal((int(rng.integers(1, 4)), int(rng.integers(2, 5)), n_in))
    targets = rng.standard_normal(windows.shape[0])
    _, grads = backward(net, windows, targets, 0.0)
    numeric = finite_difference(net, windows, targets, 0.0)
    for g, n in zip(grads, numeric):
        scale = np.maximum(np.abs(g) + np.abs(n), 1e-7)
        assert np.max(np.abs(g - n) / scale) < 1e-4


def test_gradient_check_with_l2_and_dropout():
    rng = np.random.default_rng(7)
    net = LstmNetwork.initialize(2, (3,), dropout=0.3, recurrent_dropout=0.3, seed=7)
    windows, targets = rng.standard_normal((3, 4, 2)), rng.standard_normal(3)
    _, grads = backward(net, windows, targets, 0.01, "train", seed=5)

    params = [p.copy() for p in net.parameters()]
    eps = 1e-5
    for k, p in enumerate(params):
        for idx in list(np.ndindex(p.shape))[:5]:
            vals = []
            for sign in (1, -1):
                trial = [q.copy() for q in params]
                trial[k][idx] += sign * eps
                net.set_parameters(trial)
                vals.append(backward(net, windows, targets, 0.01, "train", seed=5)[0])
            num = (vals[0] - vals[1]) / (2 * eps)
            assert abs(num - grads[k][idx]) <= 1e-4 * max(abs(num) + abs(grads[k][idx]), 1e-7)
        net.set_parameters(params)


def test_residual_free_batch_gives_pure_l2_gradients(rng):
    net = LstmNetwork.initialize(2, (3,), seed=2)
    windows = rng.standard_normal((5, 4, 2))
    targets, _ = forward(net, windows)
    loss, grads = backward(net, windows, targets, 0.05)
    assert loss == pytest.approx(0.05 * weight_penalty(net), rel=1e-12)
    layer = net.layers[0]
    assert np.allclose(grads[0], 2 * 0.05 * layer.W_v, atol=1e-14)
    assert np.allclose(grads[1], 2 * 0.05 * layer.W_h, atol=1e-14)
    assert np.allclose(grads[2], 0, atol=1e-14)


def test_batch_permutation_and_duplication(rng):
    net = LstmNetwork.initialize(2, (3,), seed=4)
    windows, targets = rng.standard_normal((6, 5, 2)), rng.standard_normal(6)
    loss, grads = backward(net, windows, targets)
    perm = rng.permutation(6)
    loss_p, grads_p = backward(net, windows[perm], targets[perm])
    loss_d, grads_d = backward(net, np.concatenate([windows, windows]), np.concatenate([targets, targets]))
    assert loss_p == pytest.approx(loss, rel=1e-12) and loss_d == pytest.approx(loss, rel=1e-12)
    for a, b, c in zip(grads, grads_p, grads_d):
        assert np.allclose(a, b, rtol=1e-10, atol=1e-14) and np.allclose(a, c, rtol=1e-10, atol=1e-14)


def test_checkpoint_round_trip(tmp_path):
    net = LstmNetwork.initialize(3, (4, 2), dropout=0.1, seed=8)
    path = save_checkpoint(tmp_path / "model.json", net, {"lookback": 10})
    again, record = load_checkpoint(path)
    assert record["train_config"] == {"lookback": 10}
    for a, b in zip(net.parameters(), again.parameters()):
        assert np.array_equal(a, b)


# -- training ----------------------------------------------------------------


def sine_task(n=200, lookback=10):
    t = np.arange(n + 1)
    series = np.sin(2 * np.pi * t / 25)
    return series[:-1, None], series[1:], np.arange(lookback - 1, n)


def test_sine_convergence():
    X, y, rows = sine_task()
    net = LstmNetwork.initialize(1, (8,), seed=0)
    cfg = TrainConfig(lookback=10, batch_size=16, epochs=300, learning_rate=1e-2, seed=0)
    net, history = train_network(net, X, y, rows, None, cfg)
    pred, _ = forward(net, make_windows(X, 10)[rows - 9])
    assert float(np.mean((pred - y[rows]) ** 2)) < 1e-3
    assert len(history["train_loss"]) == 300


def test_zero_epochs_is_noop():
    X, y, rows = sine_task(60)
    net = LstmNetwork.initialize(1, (4,), seed=0)
    before = [p.copy() for p in net.parameters()]
    net, history = train_network(net, X, y, rows, None, TrainConfig(epochs=0))
    assert history == {"train_loss": [], "val_loss": []}
    assert all(np.array_equal(a, b) for a, b in zip(before, net.parameters()))


def test_training_is_deterministic():
    X, y, rows = sine_task(80)
    cfg = TrainConfig(lookback=10, batch_size=8, epochs=5, learning_rate=1e-2, seed=3)
    runs = []
    for _ in range(2):
        net = LstmNetwork.initialize(1, (4,), dropout=0.2, recurrent_dropout=0.2, seed=1)
        runs.append(train_network(net, X, y, rows[:50], rows[50:], cfg))
    assert runs[0][1] == runs[1][1]
    assert all(np.array_equal(a, b) for a, b in zip(runs[0][0].parameters(), runs[1][0].parameters()))


def test_early_stopping_restores_best():
    X, y, rows = sine_task(120)
    cfg = TrainConfig(lookback=10, batch_size=8, epochs=40, learning_rate=5e-2, seed=0, early_stop_patience=2)
    net, history = train_network(LstmNetwork.initialize(1, (4,), seed=0), X, y, rows[:80], rows[80:], cfg)
    best = min(history["val_loss"])
    pred, _ = forward(net, make_windows(X, 10)[rows[80:] - 9])
    assert float(np.mean((pred - y[rows[80:]]) ** 2)) == pytest.approx(best, rel=1e-12)


def test_train_config_validation():
    with pytest.raises(ContractError):
        TrainConfig(lookback=0)
    with pytest.raises(ContractError):
        TrainConfig(learning_rate=0.0)


# -- features-based fit / predict / tune -------------------------------------


@pytest.fixture(scope="module")
def small_features():
    rng = np.random.default_rng(21)
    dates = np.arange(np.datetime64("2018-06-01"), np.datetime64("2021-06-30"))
    close = 100 * np.exp(np.cumsum(rng.standard_normal(dates.size) * 0.01))
    prices = PriceSeries("SMALL", dates, close)
    split = SplitSpec("2018-06-01", "2020-12-31", "2020-07-01", "2020-12-31", "2021-01-01", "2021-06-30")
    return build_features(apply_diff(log_transform(prices), frac_weights(0.4, 1e-3)), prices, split)


def quick_spec(**train):
    base = dict(lookback=5, batch_size=64, epochs=2, learning_rate=1e-2)
    base.update(train)
    return ModelSpec((4,), 0.0, 0.0, TrainConfig(**base))


def test_predict_length_and_causality(small_features):
    fm = small_features
    net = LstmNetwork.initialize(fm.X.shape[1], (4,), seed=0)
    pred = predict_series(net, fm, lookback=5)
    assert pred.values.size == len(fm) - 5 + 1
    assert np.array_equal(pred.dates, fm.dates[4:])
    masked = predict_series(net, fm, 5, mask=fm.test_mask)
    assert np.all(masked.target_dates >= np.datetime64("2021-01-01"))
    # truncating the rows after t leaves the prediction at t unchanged
    windows = make_windows(fm.X, 5)
    t = 300
    short, _ = forward(net, make_windows(fm.X[: t + 1], 5)[-1])
    assert short == pytest.approx(forward(net, windows[t - 4])[0], abs=0)


def test_constant_features_give_constant_prediction():
    net = LstmNetwork.initialize(3, (4,), seed=0)
    pred, _ = forward(net, make_windows(np.tile([0.2, -1.0, 0.5], (30, 1)), 10))
    assert np.all(pred == pred[0])


def test_predict_too_few_rows(small_features):
    with pytest.raises(InsufficientDataError):
        predict_series(LstmNetwork.initialize(small_features.X.shape[1], (2,)), small_features, lookback=10**6)


def test_fit_on_features(small_features):
    spec = quick_spec()
    net, history = fit(spec.build(small_features.X.shape[1]), small_features, spec.train)
    assert len(history["train_loss"]) == 2 and len(history["val_loss"]) == 2


def test_tune_budget_one(small_features):
    result = tune(small_features, [quick_spec()], budget=1, seed=0)
    assert len(result.log) == 1
    assert result.best.hidden_sizes == (4,)
    assert result.best.train.lookback == 5


def test_tune_is_deterministic(small_features):
    space = {
        "layers": [1],
        "cells": [2, 4],
        "dropout": [0.0, 0.2],
        "recurrent_dropout": [0.0, 0.2],
        "l2_rate": [1e-6, 1e-4],
        "learning_rate": [1e-3, 1e-2],
        "batch_size": [64],
        "epochs": [1, 2],
        "lookback": 5,
    }
    a = tune(small_features, space, budget=3, seed=11)
    b = tune(small_features, space, budget=3, seed=11)
    assert a.best == b.best and a.log == b.log


def test_rigged_space_known_good_wins(small_features):
    bad = quick_spec(learning_rate=1e200)
    good = quick_spec()
    result = tune(small_features, [bad, bad, good, bad, bad], budget=5, seed=0)
    statuses = [e["status"] for e in result.log]
    assert statuses == ["diverged", "diverged", "ok", "diverged", "diverged"]
    assert result.best.train.learning_rate == good.train.learning_rate


def test_all_trials_diverge(small_features):
    bad = quick_spec(learning_rate=1e200)
    with pytest.raises(TuningError) as info:
        tune(small_features, [bad, bad], budget=2)
    assert len(info.value.log) == 2


def test_tie_break_prefers_smaller_network(small_features):
    # zero epochs leaves initialisation untouched; zero head makes every trial predict 0
    big = replace(quick_spec(epochs=0), hidden_sizes=(6,))
    small = replace(quick_spec(epochs=0), hidden_sizes=(2,))
    result = tune(small_features, [big, small], budget=2)
    scores = [e["score"] for e in result.log]
    if scores[0] == scores[1]:
        assert result.best.hidden_sizes == (2,)
    else:
        assert result.best.hidden_sizes == ((6,) if scores[0] < scores[1] else (2,))
