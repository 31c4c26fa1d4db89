"""Layers used by the encoder/decoder stacks.

Each layer owns its parameters as Tensors with requires_grad=True and exposes
`params()` as an ordered {name: Tensor} dict for the optimizer and
checkpointing.
"""

import numpy as np

from ..errors import HeadDivisibility
from .tensor import Tensor, softmax

LN_EPS = 1e-5
IN_EPS = 1e-5


def _param(rng, shape, scale, dist, dtype):
    if dist == "uniform":
        data = rng.uniform(-scale, scale, size=shape)
    else:
        data = rng.normal(0.0, scale, size=shape)
    return Tensor(data.astype(dtype), requires_grad=True)


class Conv1d:
    """Same-padded stride-1 1-D convolution, fan-in-scaled uniform init."""

    def __init__(self, c_in, c_out, k, rng, dtype=np.float32):
        assert k % 2 == 1
        scale = 1.0 / np.sqrt(c_in * k)
        self.weight = _param(rng, (c_out, c_in, k), scale, "uniform", dtype)
        self.bias = Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True)

    def __call__(self, x):
        return x.conv1d(self.weight, self.bias)

    def params(self):
        return {"weight": self.weight, "bias": self.bias}


class InstanceNorm:
    """Per-channel normalization over time.

    mode="full": (x - mu) / sqrt(var + eps); mode="mean_only": x - mu.
    Optional learned affine gain/bias per channel.
    """

    def __init__(self, channels, mode="full", affine=True, dtype=np.float32):
        if mode not in ("full", "mean_only"):
            raise ValueError(f"bad instance-norm mode {mode!r}")
        self.mode = mode
        self.affine = affine
        if affine:
            self.gain = Tensor(np.ones((channels, 1), dtype=dtype), requires_grad=True)
            self.bias = Tensor(np.zeros((channels, 1), dtype=dtype), requires_grad=True)

    def __call__(self, x):
        mu = x.mean(axis=1, keepdims=True)
        centered = x - mu
        if self.mode == "full":
            var = (centered * centered).mean(axis=1, keepdims=True)
            out = centered / (var + IN_EPS).sqrt()
        else:
            out = centered
        if self.affine:
            out = out * self.gain + self.bias
        return out

    def params(self):
        if not self.affine:
            return {}
        return {"gain": self.gain, "bias": self.bias}


class LayerNorm:
    def __init__(self, dim, dtype=np.float32):
        self.gain = Tensor(np.ones(dim, dtype=dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(dim, dtype=dtype), requires_grad=True)

    def __call__(self, x):
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        return centered / (var + LN_EPS).sqrt() * self.gain + self.bias

    def params(self):
        return {"gain": self.gain, "bias": self.bias}


class TransformerEncoderLayer:
    """Pre-norm encoder layer on (T, d) sequences.

    x + MHSA(LN(x)), then x + FFN(LN(x)); FFN activation is leaky-relu;
    no mask, no dropout.
    """

    def __init__(self, d, heads, ff_dim, rng, slope=0.2, dtype=np.float32):
        if d % heads != 0:
            raise HeadDivisibility(f"d={d} not divisible by heads={heads}")
        self.d = d
        self.heads = heads
        self.slope = slope
        scale = 1.0 / np.sqrt(d)
        self.wq = _param(rng, (d, d), scale, "normal", dtype)
        self.wk = _param(rng, (d, d), scale, "normal", dtype)
        self.wv = _param(rng, (d, d), scale, "normal", dtype)
        self.wo = _param(rng, (d, d), scale, "normal", dtype)
        self.bq = Tensor(np.zeros(d, dtype=dtype), requires_grad=True)
        self.bk = Tensor(np.zeros(d, dtype=dtype), requires_grad=True)
        self.bv = Tensor(np.zeros(d, dtype=dtype), requires_grad=True)
        self.bo = Tensor(np.zeros(d, dtype=dtype), requires_grad=True)
        self.ln1 = LayerNorm(d, dtype)
        self.ln2 = LayerNorm(d, dtype)
        self.w1 = _param(rng, (d, ff_dim), 1.0 / np.sqrt(d), "normal", dtype)
        self.b1 = Tensor(np.zeros(ff_dim, dtype=dtype), requires_grad=True)
        self.w2 = _param(rng, (ff_dim, d), 1.0 / np.sqrt(ff_dim), "normal", dtype)
        self.b2 = Tensor(np.zeros(d, dtype=dtype), requires_grad=True)

    def attention(self, x, return_weights=False):
        t, d = x.shape
        h, dh = self.heads, self.d // self.heads

        def split(y):  # (T, d) -> (h, T, dh)
            return y.reshape(t, h, dh).transpose(1, 0, 2)

        q = split(x @ self.wq + self.bq)
        k = split(x @ self.wk + self.bk)
        v = split(x @ self.wv + self.bv)
        scores = (q @ k.transpose(0, 2, 1)) * (1.0 / np.sqrt(dh))
        attn = softmax(scores, axis=-1)
        ctx = (attn @ v).transpose(1, 0, 2).reshape(t, d)
        out = ctx @ self.wo + self.bo
        if return_weights:
            return out, attn
        return out

    def __call__(self, x):
        x = x + self.attention(self.ln1(x))
        y = self.ln2(x)
        y = (y @ self.w1 + self.b1).leaky_relu(self.slope)
        y = y @ self.w2 + self.b2
        return x + y

    def params(self):
        out = {
            "wq": self.wq, "wk": self.wk, "wv": self.wv, "wo": self.wo,
            "bq": self.bq, "bk": self.bk, "bv": self.bv, "bo": self.bo,
            "w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2,
        }
        for k, v in self.ln1.params().items():
            out[f"ln1.{k}"] = v
        for k, v in self.ln2.params().items():
            out[f"ln2.{k}"] = v
        return out
