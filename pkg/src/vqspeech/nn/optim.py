"""Bias-corrected adaptive-moment optimizer."""

import numpy as np

from ..errors import ShapeMismatch


class Adam:
    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        # params: {name: Tensor}; insertion order fixes update order
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {n: np.zeros_like(p.data) for n, p in self.params.items()}
        self.v = {n: np.zeros_like(p.data) for n, p in self.params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad
            if g.shape != p.data.shape:
                raise ShapeMismatch(f"grad shape {g.shape} != param shape {p.data.shape} for {name}")
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            mhat = m / bc1
            vhat = v / bc2
            p.data -= (self.lr * mhat / (np.sqrt(vhat) + self.eps)).astype(p.data.dtype)


def adam_step(param, grad, state):
    """Single-tensor functional form used by the unit tests.

    state: dict with m, v, t, lr, beta1, beta2, eps (m/v updated in place).
    """
    if grad.shape != param.shape:
        raise ShapeMismatch("grad/param shape mismatch")
    state["t"] += 1
    b1, b2 = state["beta1"], state["beta2"]
    state["m"] = b1 * state["m"] + (1 - b1) * grad
    state["v"] = b2 * state["v"] + (1 - b2) * grad * grad
    mhat = state["m"] / (1 - b1 ** state["t"])
    vhat = state["v"] / (1 - b2 ** state["t"])
    return param - state["lr"] * mhat / (np.sqrt(vhat) + state["eps"])


def adam_state(shape, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8, dtype=np.float64):
    return {
        "m": np.zeros(shape, dtype=dtype),
        "v": np.zeros(shape, dtype=dtype),
        "t": 0,
        "lr": lr,
        "beta1": beta1,
        "beta2": beta2,
        "eps": eps,
    }
