"""Training loop, loss, gradient verification, prediction, checkpoints.

Training is plain mini-batch gradient descent with Adam. Everything is
deterministic given the config seed: weight init and the per-epoch shuffle
derive from named SplitMix64 streams.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..features import FeatureTensor
from ..records import ValidationError
from ..rng import SplitMix64
from .forest import RandomForest, _Node
from .nn import ConvNet1D, LSTMNet, sigmoid

BCE_EPS = 1e-7
PROB_EPS = 1e-15  # keeps sigmoid outputs strictly inside (0, 1)

MODEL_KINDS = ("rf", "cnn", "lstm")


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class FlatSample:
    """Row-major (channel-by-time) flattening of a feature tensor."""

    features: np.ndarray
    label: int
    subject_id: str


def flatten(tensor: FeatureTensor | np.ndarray, label: int, subject_id: str) -> FlatSample:
    values = tensor.values if isinstance(tensor, FeatureTensor) else np.asarray(tensor, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValidationError("cannot flatten a tensor with non-finite values")
    return FlatSample(values.reshape(-1).copy(), int(label), subject_id)


def bce(p: float | np.ndarray, y: float | np.ndarray) -> float:
    """Binary cross entropy with p clamped to [1e-7, 1 - 1e-7]. Scalar mean."""
    p = np.clip(np.asarray(p, dtype=np.float64), BCE_EPS, 1.0 - BCE_EPS)
    y = np.asarray(y, dtype=np.float64)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


@dataclass(frozen=True)
class TrainConfig:
    model: str
    lr: float
    batch_size: int
    epochs: int
    seed: int = 0
    loss: str = "bce"

    def __post_init__(self):
        if self.model not in ("cnn", "lstm"):
            raise ValidationError(f"train() handles neural models, got {self.model!r}")
        if not self.lr > 0:
            raise ValidationError(f"learning rate must be > 0, got {self.lr}")
        if self.batch_size < 1:
            raise ValidationError(f"batch size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.loss != "bce":
            raise ValidationError(f"unsupported loss {self.loss!r}")


# defaults per model kind
def default_config(model: str, seed: int = 0) -> TrainConfig:
    if model == "cnn":
        return TrainConfig(model="cnn", lr=1e-5, batch_size=6, epochs=150, seed=seed)
    if model == "lstm":
        return TrainConfig(model="lstm", lr=1e-3, batch_size=6, epochs=200, seed=seed)
    raise ValidationError(f"no neural training defaults for {model!r}")


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for k, p in self.params.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g**2
            p -= self.lr * (self.m[k] / b1c) / (np.sqrt(self.v[k] / b2c) + self.eps)


def build_model(kind: str, in_channels: int, seed: int):
    if kind == "cnn":
        return ConvNet1D(in_channels, seed=seed)
    if kind == "lstm":
        return LSTMNet(in_channels, seed=seed)
    raise ValidationError(f"unknown neural model kind {kind!r}")


def train(
    model_kind: str,
    dataset: Sequence[tuple[np.ndarray, int]],
    config: TrainConfig,
):
    """Train a neural model; returns (model, per-epoch mean training loss).

    ``dataset`` is a sequence of ((channels, length) array, label) pairs of
    one common shape. Aborts with TrainingDiverged if the loss goes
    non-finite.
    """
    if config.model != model_kind:
        config = TrainConfig(model=model_kind, lr=config.lr, batch_size=config.batch_size,
                             epochs=config.epochs, seed=config.seed, loss=config.loss)
    if not dataset:
        raise ValidationError("empty training dataset")
    X = np.stack([np.asarray(v, dtype=np.float64) for v, _ in dataset])
    y = np.array([int(label) for _, label in dataset], dtype=np.float64)
    n = X.shape[0]

    model = build_model(model_kind, X.shape[1], seed=config.seed)
    optimizer = Adam(model.params, lr=config.lr)
    shuffle_rng = SplitMix64(config.seed).derive("shuffle")

    losses: list[float] = []
    for _epoch in range(config.epochs):
        perm = shuffle_rng.shuffle(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            xb, yb = X[idx], y[idx]
            logits = model.forward(xb)
            p = sigmoid(logits)
            loss = bce(p, yb)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"loss became non-finite at epoch {_epoch}")
            total += loss * len(idx)
            dlogit = (p - yb) / len(idx)
            grads = model.backward(dlogit)
            optimizer.step(grads)
        losses.append(total / n)
    return model, losses


def predict(model, tensor: FeatureTensor | np.ndarray) -> float:
    """Probability of class 1 for one feature tensor."""
    values = tensor.values if isinstance(tensor, FeatureTensor) else np.asarray(tensor, dtype=np.float64)
    if isinstance(model, RandomForest):
        flat = values.reshape(-1)
        return float(model.predict_proba(flat[None, :])[0])
    if values.ndim != 2:
        raise ValidationError(f"expected a (channels, length) tensor, got shape {values.shape}")
    logit = model.forward(values[None])
    p = float(sigmoid(logit)[0])
    return float(np.clip(p, PROB_EPS, 1.0 - PROB_EPS))


def grad_check(
    model_kind: str,
    x: np.ndarray,
    label: int = 1,
    eps: float = 1e-5,
    n_params: int = 100,
    seed: int = 0,
) -> float:
    """Compare analytic gradients to central finite differences.

    Checks ``n_params`` randomly chosen parameters and returns the max
    relative error |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).

    Each parameter is differenced at steps eps/10, eps and 100*eps and the
    best agreement kept: the small step avoids crossing ReLU/max-pool kinks,
    the large one lifts vanishing gradients above the floating-point
    cancellation floor of the loss. A genuinely wrong analytic gradient
    disagrees with the numerical one at every step size.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    y = np.array([float(label)])
    model = build_model(model_kind, x.shape[1], seed=seed)

    def loss_now() -> float:
        return bce(sigmoid(model.forward(x)), y)

    p = sigmoid(model.forward(x))
    grads = model.backward((p - y) / 1.0)

    rng = SplitMix64(seed).derive("gradcheck")
    names = list(model.params)
    sizes = np.array([model.params[n].size for n in names])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])

    worst = 0.0
    for _ in range(n_params):
        flat_idx = rng.next_u64() % total
        which = int(np.searchsorted(offsets, flat_idx, side="right") - 1)
        name = names[which]
        local = int(flat_idx - offsets[which])
        param = model.params[name]
        ij = np.unravel_index(local, param.shape)

        orig = param[ij]
        analytic = float(grads[name][ij])
        best = np.inf
        for h in (eps / 10.0, eps, 100.0 * eps):
            param[ij] = orig + h
            f_plus = loss_now()
            param[ij] = orig - h
            f_minus = loss_now()
            param[ij] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
            best = min(best, err)
        worst = max(worst, best)
    return worst


# --------------------------------------------------------------------------
# checkpoints: JSON header line + flat little-endian float64 parameter block


def save_model(model, path: str | Path) -> None:
    path = Path(path)
    if isinstance(model, RandomForest):
        header = {
            "format": "gmakit-model",
            "version": 1,
            "kind": "rf",
            "seed": model.seed,
            "n_features": model.n_features,
            "trees": [t.to_dict() for t in model.trees],
            "params": [],
        }
        block = b""
    else:
        names = list(model.params)
        header = {
            "format": "gmakit-model",
            "version": 1,
            "kind": model.kind,
            "seed": model.seed,
            "arch": model.arch(),
            "params": [[n, list(model.params[n].shape)] for n in names],
        }
        block = b"".join(np.ascontiguousarray(model.params[n], dtype="<f8").tobytes() for n in names)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, separators=(",", ":")).encode("utf-8"))
        fh.write(b"\n")
        fh.write(block)


def load_model(path: str | Path):
    path = Path(path)
    with open(path, "rb") as fh:
        header_line = fh.readline()
        block = fh.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("format") != "gmakit-model":
        raise ValidationError(f"{path}: not a model checkpoint")
    kind = header["kind"]
    if kind == "rf":
        return RandomForest(
            trees=[_Node.from_dict(d) for d in header["trees"]],
            n_features=header["n_features"],
            seed=header["seed"],
        )
    if kind == "cnn":
        arch = header["arch"]
        model = ConvNet1D(
            arch["in_channels"],
            seed=header["seed"],
            conv_channels=tuple(arch["conv_channels"]),
            kernel_size=arch["kernel_size"],
            bottleneck=arch["bottleneck"],
        )
    elif kind == "lstm":
        arch = header["arch"]
        model = LSTMNet(
            arch["in_channels"],
            seed=header["seed"],
            hidden_size=arch["hidden_size"],
            num_layers=arch["num_layers"],
        )
    else:
        raise ValidationError(f"{path}: unknown model kind {kind!r}")

    offset = 0
    for name, shape in header["params"]:
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(block, dtype="<f8", count=count, offset=offset).reshape(shape)
        model.params[name] = arr.astype(np.float64)
        offset += count * 8
    return model
