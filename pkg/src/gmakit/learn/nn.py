"""1-D CNN and stacked LSTM with hand-derived backpropagation.

Both models map a (batch, channels, length) tensor to one logit per sample;
the sigmoid and the binary cross entropy live in the training module, so
backward() takes d(loss)/d(logit) directly.

Weight initialisation draws from a SplitMix64 stream in a fixed parameter
order: Xavier-uniform for convolutional and dense weights, uniform
+-1/sqrt(fan_in) for recurrent weights, zero biases.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..records import ValidationError
from ..rng import SplitMix64


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _xavier(rng: SplitMix64, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


# --------------------------------------------------------------------------
# layer primitives (forward returns (y, cache))


def _conv1d_forward(x, W, b):
    # x (B, C, L), W (O, C, K), same padding, stride 1
    k = W.shape[2]
    pad = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    win = sliding_window_view(xp, k, axis=2)              # (B, C, L, K)
    y = np.einsum("bclk,ock->bol", win, W, optimize=True) + b[None, :, None]
    return y, (win, W)


def _conv1d_backward(dy, cache):
    win, W = cache
    k = W.shape[2]
    pad = k // 2
    dW = np.einsum("bclk,bol->ock", win, dy, optimize=True)
    db = dy.sum(axis=(0, 2))
    dyp = np.pad(dy, ((0, 0), (0, 0), (pad, pad)))
    dwin = sliding_window_view(dyp, k, axis=2)            # (B, O, L, K)
    dx = np.einsum("bolk,ock->bcl", dwin, W[:, :, ::-1], optimize=True)
    return dx, dW, db


def _relu_forward(x):
    mask = x > 0
    return x * mask, mask


def _relu_backward(dy, mask):
    return dy * mask


def _maxpool2_forward(x):
    length = x.shape[2]
    if length < 2:  # nothing to pool
        return x, None
    half = length // 2
    xt = x[:, :, : 2 * half].reshape(x.shape[0], x.shape[1], half, 2)
    idx = xt.argmax(axis=3)
    y = np.take_along_axis(xt, idx[..., None], axis=3)[..., 0]
    return y, (length, idx)


def _maxpool2_backward(dy, cache):
    if cache is None:
        return dy
    length, idx = cache
    half = idx.shape[2]
    dxt = np.zeros((dy.shape[0], dy.shape[1], half, 2))
    np.put_along_axis(dxt, idx[..., None], dy[..., None], axis=3)
    dx = np.zeros((dy.shape[0], dy.shape[1], length))
    dx[:, :, : 2 * half] = dxt.reshape(dy.shape[0], dy.shape[1], 2 * half)
    return dx


def _dense_forward(x, W, b):
    # x (B, In), W (Out, In)
    return x @ W.T + b, x


def _dense_backward(dy, x, W):
    return dy @ W, dy.T @ x, dy.sum(axis=0)


# --------------------------------------------------------------------------


class ConvNet1D:
    """Three conv blocks (kernel 5, same padding, ReLU, max-pool 2) into a
    global average over time, a 150-unit bottleneck, and a single logit."""

    kind = "cnn"

    def __init__(
        self,
        in_channels: int,
        seed: int = 0,
        conv_channels: tuple[int, ...] = (64, 64, 64),
        kernel_size: int = 5,
        bottleneck: int = 150,
    ):
        self.in_channels = in_channels
        self.conv_channels = tuple(conv_channels)
        self.kernel_size = kernel_size
        self.bottleneck = bottleneck
        self.seed = seed

        rng = SplitMix64(seed).derive("init")
        self.params: dict[str, np.ndarray] = {}
        c_in = in_channels
        for i, c_out in enumerate(self.conv_channels):
            self.params[f"conv{i}_W"] = _xavier(
                rng, (c_out, c_in, kernel_size), c_in * kernel_size, c_out * kernel_size
            )
            self.params[f"conv{i}_b"] = np.zeros(c_out)
            c_in = c_out
        self.params["fc1_W"] = _xavier(rng, (bottleneck, c_in), c_in, bottleneck)
        self.params["fc1_b"] = np.zeros(bottleneck)
        self.params["fc2_W"] = _xavier(rng, (1, bottleneck), bottleneck, 1)
        self.params["fc2_b"] = np.zeros(1)
        self._cache = None

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ValidationError(f"expected (batch, {self.in_channels}, length) input, got {x.shape}")
        caches = []
        h = x
        for i in range(len(self.conv_channels)):
            h, conv_cache = _conv1d_forward(h, self.params[f"conv{i}_W"], self.params[f"conv{i}_b"])
            h, relu_mask = _relu_forward(h)
            h, pool_cache = _maxpool2_forward(h)
            caches.append((conv_cache, relu_mask, pool_cache))
        pooled_len = h.shape[2]
        g = h.mean(axis=2)                                   # (B, C)
        f1, f1_x = _dense_forward(g, self.params["fc1_W"], self.params["fc1_b"])
        a1, a1_mask = _relu_forward(f1)
        logits, f2_x = _dense_forward(a1, self.params["fc2_W"], self.params["fc2_b"])
        self._cache = (caches, pooled_len, f1_x, a1_mask, f2_x)
        return logits[:, 0]

    def backward(self, dlogit: np.ndarray) -> dict[str, np.ndarray]:
        caches, pooled_len, f1_x, a1_mask, f2_x = self._cache
        grads: dict[str, np.ndarray] = {}
        dy = np.asarray(dlogit, dtype=np.float64)[:, None]
        da1, grads["fc2_W"], grads["fc2_b"] = _dense_backward(dy, f2_x, self.params["fc2_W"])
        df1 = _relu_backward(da1, a1_mask)
        dg, grads["fc1_W"], grads["fc1_b"] = _dense_backward(df1, f1_x, self.params["fc1_W"])
        dh = np.repeat(dg[:, :, None] / pooled_len, pooled_len, axis=2)
        for i in reversed(range(len(self.conv_channels))):
            conv_cache, relu_mask, pool_cache = caches[i]
            dh = _maxpool2_backward(dh, pool_cache)
            dh = _relu_backward(dh, relu_mask)
            dh, grads[f"conv{i}_W"], grads[f"conv{i}_b"] = _conv1d_backward(dh, conv_cache)
        return grads

    def arch(self) -> dict:
        return {
            "in_channels": self.in_channels,
            "conv_channels": list(self.conv_channels),
            "kernel_size": self.kernel_size,
            "bottleneck": self.bottleneck,
        }


class LSTMNet:
    """Stacked LSTM (default 3 layers, hidden 64); the logit is a linear
    readout of the top layer's final hidden state.

    Gate layout in the fused weight matrix is [input, forget, cell, output],
    acting on the concatenation [x_t, h_{t-1}].
    """

    kind = "lstm"

    def __init__(self, in_channels: int, seed: int = 0, hidden_size: int = 64, num_layers: int = 3):
        self.in_channels = in_channels
        self.hidden_size = hidden_size
        self.num_layers = num_layers
        self.seed = seed

        rng = SplitMix64(seed).derive("init")
        self.params: dict[str, np.ndarray] = {}
        for layer in range(num_layers):
            d_in = in_channels if layer == 0 else hidden_size
            fan_in = d_in + hidden_size
            bound = 1.0 / np.sqrt(fan_in)
            self.params[f"lstm{layer}_W"] = rng.uniform(-bound, bound, (4 * hidden_size, fan_in))
            self.params[f"lstm{layer}_b"] = np.zeros(4 * hidden_size)
        self.params["head_W"] = _xavier(rng, (1, hidden_size), hidden_size, 1)
        self.params["head_b"] = np.zeros(1)
        self._cache = None

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ValidationError(f"expected (batch, {self.in_channels}, length) input, got {x.shape}")
        batch, _, length = x.shape
        hid = self.hidden_size

        h = [np.zeros((batch, hid)) for _ in range(self.num_layers)]
        c = [np.zeros((batch, hid)) for _ in range(self.num_layers)]
        steps: list[list[tuple]] = [[] for _ in range(self.num_layers)]
        inp_seq = [x[:, :, t] for t in range(length)]
        for layer in range(self.num_layers):
            W = self.params[f"lstm{layer}_W"]
            b = self.params[f"lstm{layer}_b"]
            out_seq = []
            for t in range(length):
                inp = inp_seq[t]
                zcat = np.concatenate([inp, h[layer]], axis=1)
                z = zcat @ W.T + b
                gi = sigmoid(z[:, :hid])
                gf = sigmoid(z[:, hid:2 * hid])
                gg = np.tanh(z[:, 2 * hid:3 * hid])
                go = sigmoid(z[:, 3 * hid:])
                c_prev = c[layer]
                c[layer] = gf * c_prev + gi * gg
                tc = np.tanh(c[layer])
                h[layer] = go * tc
                steps[layer].append((zcat, gi, gf, gg, go, c_prev, tc))
                out_seq.append(h[layer])
            inp_seq = out_seq
        logits = h[-1] @ self.params["head_W"].T + self.params["head_b"]
        self._cache = (steps, h[-1], batch, length)
        return logits[:, 0]

    def backward(self, dlogit: np.ndarray) -> dict[str, np.ndarray]:
        steps, h_final, batch, length = self._cache
        hid = self.hidden_size
        dlogit = np.asarray(dlogit, dtype=np.float64)[:, None]

        grads = {name: np.zeros_like(p) for name, p in self.params.items()}
        grads["head_W"] = dlogit.T @ h_final
        grads["head_b"] = dlogit.sum(axis=0)

        # gradient flowing into each h_t of the current layer from above
        dh_above = [np.zeros((batch, hid)) for _ in range(length)]
        dh_above[-1] = dlogit @ self.params["head_W"]
        for layer in reversed(range(self.num_layers)):
            W = self.params[f"lstm{layer}_W"]
            d_in = W.shape[1] - hid
            dW = grads[f"lstm{layer}_W"]
            db = grads[f"lstm{layer}_b"]
            dx_seq = [None] * length
            dh_next = np.zeros((batch, hid))
            dc_next = np.zeros((batch, hid))
            for t in reversed(range(length)):
                zcat, gi, gf, gg, go, c_prev, tc = steps[layer][t]
                dh = dh_above[t] + dh_next
                do = dh * tc
                dc = dc_next + dh * go * (1.0 - tc**2)
                di = dc * gg
                dg = dc * gi
                df = dc * c_prev
                dz = np.concatenate(
                    [
                        di * gi * (1.0 - gi),
                        df * gf * (1.0 - gf),
                        dg * (1.0 - gg**2),
                        do * go * (1.0 - go),
                    ],
                    axis=1,
                )
                dW += dz.T @ zcat
                db += dz.sum(axis=0)
                dcat = dz @ W
                dx_seq[t] = dcat[:, :d_in]
                dh_next = dcat[:, d_in:]
                dc_next = dc * gf
            dh_above = dx_seq
        return grads

    def arch(self) -> dict:
        return {
            "in_channels": self.in_channels,
            "hidden_size": self.hidden_size,
            "num_layers": self.num_layers,
        }
