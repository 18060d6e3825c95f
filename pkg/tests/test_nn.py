import math

import numpy as np
import pytest

from gmakit.learn import (
    ConvNet1D,
    LSTMNet,
    TrainConfig,
    TrainingDiverged,
    bce,
    flatten,
    grad_check,
    load_model,
    predict,
    save_model,
    sigmoid,
    train,
)
from gmakit.learn.forest import rf_fit
from gmakit.learn.training import Adam
from gmakit.records import ValidationError


def toy_separable(n=20, channels=4, length=20, seed=42, gap=0.6, noise=0.15):
    rng = np.random.default_rng(seed)
    data = []
    for i in range(n):
        label = i % 2
        base = gap if label else -gap
        data.append((base + noise * rng.standard_normal((channels, length)), label))
    return data


# ---------------------------------------------------------------- bce

def test_bce_analytic_values():
    assert bce(0.5, 1) == pytest.approx(math.log(2), abs=1e-12)
    assert bce(0.9, 0) == pytest.approx(-math.log(0.1), abs=1e-12)
    # perfect prediction collapses to clamp-level loss
    assert bce(1.0, 1) == pytest.approx(1e-7, rel=1e-3)
    assert bce(0.0, 0) == pytest.approx(1e-7, rel=1e-3)


def test_bce_finite_for_extreme_inputs():
    for p in (0.0, 1.0, 1e-300):
        for y in (0, 1):
            assert math.isfinite(bce(p, y))


# ---------------------------------------------------------------- adam

def test_adam_first_step_is_signed_lr():
    params = {"w": np.array([1.0, -2.0])}
    opt = Adam(params, lr=0.1)
    opt.step({"w": np.array([3.0, -4.0])})
    # bias-corrected first step is lr * g / (|g| + eps) ~= lr * sign(g)
    assert params["w"][0] == pytest.approx(1.0 - 0.1, rel=1e-6)
    assert params["w"][1] == pytest.approx(-2.0 + 0.1, rel=1e-6)


# ---------------------------------------------------------------- flatten

def test_flatten_row_major_and_inverse():
    t = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    s = flatten(t, 1, "S000")
    assert s.features.tolist() == [1, 2, 3, 4, 5, 6]
    assert np.array_equal(s.features.reshape(2, 3), t)


def test_flatten_rejects_nan():
    with pytest.raises(ValidationError):
        flatten(np.array([[np.nan, 0.0]]), 0, "S000")


# ---------------------------------------------------------------- training

def test_cnn_learns_separable_toy_set():
    data = toy_separable()
    # oracle: a linear model separates this set perfectly
    from sklearn.linear_model import LogisticRegression
    X = np.stack([x.reshape(-1) for x, _ in data])
    y = np.array([label for _, label in data])
    assert LogisticRegression(max_iter=1000).fit(X, y).score(X, y) == 1.0

    model, losses = train("cnn", data, TrainConfig("cnn", lr=1e-3, batch_size=6, epochs=80, seed=3))
    acc = np.mean([int(predict(model, x) > 0.5) == label for x, label in data])
    assert acc >= 0.95


def test_lstm_learns_separable_toy_set():
    data = toy_separable()
    model, _ = train("lstm", data, TrainConfig("lstm", lr=1e-2, batch_size=6, epochs=40, seed=3))
    acc = np.mean([int(predict(model, x) > 0.5) == label for x, label in data])
    assert acc >= 0.95


def test_loss_curve_non_increasing_over_last_half():
    data = toy_separable()
    _, losses = train("cnn", data, TrainConfig("cnn", lr=1e-3, batch_size=6, epochs=80, seed=3))
    half = losses[len(losses) // 2:]
    assert all(half[i + 1] <= half[i] * 1.05 for i in range(len(half) - 1))


def test_training_determinism_bit_identical():
    data = toy_separable(n=12, length=10)
    cfg = TrainConfig("cnn", lr=1e-3, batch_size=5, epochs=10, seed=7)
    m1, l1 = train("cnn", data, cfg)
    m2, l2 = train("cnn", data, cfg)
    assert l1 == l2
    for k in m1.params:
        assert np.array_equal(m1.params[k], m2.params[k])
    m3, _ = train("cnn", data, TrainConfig("cnn", lr=1e-3, batch_size=5, epochs=10, seed=8))
    assert any(not np.array_equal(m1.params[k], m3.params[k]) for k in m1.params)


def test_config_validation():
    with pytest.raises(ValidationError):
        TrainConfig("cnn", lr=1e-3, batch_size=6, epochs=0)
    with pytest.raises(ValidationError):
        TrainConfig("cnn", lr=0.0, batch_size=6, epochs=1)
    with pytest.raises(ValidationError):
        TrainConfig("cnn", lr=1e-3, batch_size=0, epochs=1)
    with pytest.raises(ValidationError):
        TrainConfig("rf", lr=1e-3, batch_size=6, epochs=1)


def test_divergence_guard():
    rng = np.random.default_rng(0)
    data = [(rng.standard_normal((4, 12)), i % 2) for i in range(8)]
    with np.errstate(all="ignore"), pytest.raises(TrainingDiverged):
        train("cnn", data, TrainConfig("cnn", lr=1e300, batch_size=4, epochs=10, seed=0))


def test_empty_dataset_rejected():
    with pytest.raises(ValidationError):
        train("cnn", [], TrainConfig("cnn", lr=1e-3, batch_size=6, epochs=1))


# ---------------------------------------------------------------- gradients

def test_grad_check_cnn():
    rng = np.random.default_rng(100)
    x = rng.standard_normal((44, 50))
    assert grad_check("cnn", x, label=1, seed=0) < 1e-4


def test_grad_check_lstm():
    rng = np.random.default_rng(101)
    x = rng.standard_normal((44, 50))
    assert grad_check("lstm", x, label=0, seed=0) < 1e-4


def test_grad_check_catches_wrong_gradients():
    # meta-test: a corrupted analytic gradient must disagree with finite
    # differences at every step size
    rng = np.random.default_rng(5)
    x = rng.standard_normal((1, 6, 16))
    y = np.array([1.0])
    model = ConvNet1D(6, seed=2, conv_channels=(8, 8), bottleneck=12)
    p = sigmoid(model.forward(x))
    grads = model.backward(p - y)

    def loss_now():
        return bce(sigmoid(model.forward(x)), y)

    name = "fc1_W"
    ij = (3, 2)
    analytic_bad = 2.0 * grads[name][ij] + 0.1  # deliberately wrong
    errs = []
    for h in (1e-6, 1e-5, 1e-3):
        orig = model.params[name][ij]
        model.params[name][ij] = orig + h
        fp = loss_now()
        model.params[name][ij] = orig - h
        fm = loss_now()
        model.params[name][ij] = orig
        numeric = (fp - fm) / (2 * h)
        errs.append(abs(analytic_bad - numeric) / max(abs(analytic_bad), abs(numeric), 1e-8))
    assert min(errs) > 1e-2


def test_zero_model_zero_input_gradient_symmetry():
    model = ConvNet1D(4, seed=0, conv_channels=(8, 8), bottleneck=12)
    for k in model.params:
        model.params[k][:] = 0.0
    x = np.zeros((1, 4, 16))
    p = sigmoid(model.forward(x))
    assert p[0] == 0.5
    grads = model.backward(p - np.array([1.0]))
    for name, g in grads.items():
        if name == "fc2_b":
            assert not np.allclose(g, 0.0)
        else:
            assert np.allclose(g, 0.0)


# ---------------------------------------------------------------- predict

def test_predict_zero_head_gives_half():
    model = ConvNet1D(4, seed=0)
    model.params["fc2_W"][:] = 0.0
    model.params["fc2_b"][:] = 0.0
    rng = np.random.default_rng(0)
    assert predict(model, rng.standard_normal((4, 30))) == 0.5


def test_predict_strictly_inside_unit_interval():
    rng = np.random.default_rng(1)
    model = ConvNet1D(4, seed=0)
    model.params["fc2_b"][:] = 1e4  # saturate the sigmoid
    p = predict(model, rng.standard_normal((4, 30)))
    assert 0.0 < p < 1.0
    lstm = LSTMNet(4, seed=0, hidden_size=8, num_layers=1)
    p2 = predict(lstm, rng.standard_normal((4, 12)))
    assert 0.0 < p2 < 1.0


def test_predict_channel_mismatch():
    model = ConvNet1D(4, seed=0)
    with pytest.raises(ValidationError):
        predict(model, np.zeros((5, 30)))
    lstm = LSTMNet(4, seed=0)
    with pytest.raises(ValidationError):
        predict(lstm, np.zeros((5, 30)))


def test_hidden_state_and_params_reported():
    lstm = LSTMNet(10, seed=0)
    cnn = ConvNet1D(10, seed=0)
    assert lstm.n_params == sum(p.size for p in lstm.params.values())
    assert cnn.n_params > 0
    out = lstm.forward(np.random.default_rng(0).standard_normal((2, 10, 20)))
    assert np.isfinite(out).all()


# ---------------------------------------------------------------- checkpoints

def test_checkpoint_roundtrip_neural(tmp_path):
    rng = np.random.default_rng(2)
    x = rng.standard_normal((6, 25))
    for kind, ctor in (("cnn", ConvNet1D), ("lstm", LSTMNet)):
        model = ctor(6, seed=4)
        path = tmp_path / f"{kind}.ckpt"
        save_model(model, path)
        back = load_model(path)
        assert predict(back, x) == predict(model, x)
        for k in model.params:
            assert np.array_equal(back.params[k], model.params[k])


def test_checkpoint_roundtrip_rf(tmp_path):
    rng = np.random.default_rng(3)
    X = rng.standard_normal((30, 5))
    y = (X[:, 0] > 0).astype(int)
    model = rf_fit(X, y, n_trees=12, seed=1)
    path = tmp_path / "rf.ckpt"
    save_model(model, path)
    back = load_model(path)
    probe = rng.standard_normal((20, 5))
    assert np.array_equal(back.predict_proba(probe), model.predict_proba(probe))


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b'{"format":"something-else"}\n')
    with pytest.raises(ValidationError):
        load_model(path)
