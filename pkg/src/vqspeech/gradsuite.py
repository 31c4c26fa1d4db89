"""Finite-difference gradient suite for every differentiable op.

Runs in 64-bit; central differences are too noisy in 32-bit. Used by the
`gradcheck` CLI subcommand and the acceptance tests.
"""

import numpy as np

from .adversarial import token_ce_loss
from .model import ModelConfig, VqVaeModel
from .nn.layers import Conv1d, InstanceNorm, TransformerEncoderLayer
from .nn.tensor import Tensor, grad_check
from .train import vqvae_loss
from .vq import Codebook, quantize_batch

TOLERANCES = {
    "conv1d": 1e-4,
    "instance_norm_full": 1e-4,
    "instance_norm_mean_only": 1e-4,
    "leaky_relu": 1e-6,
    "transformer_layer": 1e-3,
    "token_ce_input": 1e-3,
    "full_loss_params": 1e-3,
}


def _tiny_model():
    cfg = ModelConfig(v=4, d=4, c1=6, c2=5, k=3, f_bins=8,
                      quant_metric="cos", recon_loss="neg_cosine", beta=1.0)
    model = VqVaeModel(cfg, seed=7, dtype=np.float64)
    rng = np.random.default_rng(11)
    model.codebook = Codebook(
        vectors=rng.normal(size=(4, 4)),
        ema_counts=np.ones(4),
        ema_sums=rng.normal(size=(4, 4)),
    )
    return model


def param_grad_check(loss_fn, params, step=1e-6, max_elems=None):
    """Max relative error of d loss / d param over every listed parameter.

    loss_fn() rebuilds the loss from current parameter data each call.
    """
    loss = loss_fn()
    for p in params.values():
        p.grad = None
    loss.backward()
    worst = 0.0
    for name, p in params.items():
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        n = flat.size if max_elems is None else min(flat.size, max_elems)
        for i in range(n):
            orig = flat[i]
            h = step * max(1.0, abs(orig))
            flat[i] = orig + h
            up = loss_fn().item()
            flat[i] = orig - h
            dn = loss_fn().item()
            flat[i] = orig
            numeric = (up - dn) / (2 * h)
            a = analytic.reshape(-1)[i]
            rel = abs(a - numeric) / max(abs(a) + abs(numeric), 1e-6)
            worst = max(worst, rel)
    return worst


def run_suite(seeds=3):
    """Returns {op: (max_rel_err, tolerance, passed)}."""
    results = {}

    def record(name, err):
        tol = TOLERANCES[name]
        results[name] = (err, tol, err <= tol)

    worst = 0.0
    for s in range(seeds):
        rng = np.random.default_rng(100 + s)
        w = Tensor(rng.normal(size=(4, 3, 3)))
        b = Tensor(rng.normal(size=4))
        err = grad_check(lambda t: (t.conv1d(w, b) ** 2).sum(),
                         rng.normal(size=(3, 8)))
        worst = max(worst, err)
    record("conv1d", worst)

    for mode, key in (("full", "instance_norm_full"),
                      ("mean_only", "instance_norm_mean_only")):
        worst = 0.0
        for s in range(seeds):
            rng = np.random.default_rng(200 + s)
            norm = InstanceNorm(4, mode, dtype=np.float64)
            norm.gain.data[...] = rng.normal(size=norm.gain.shape)
            norm.bias.data[...] = rng.normal(size=norm.bias.shape)
            err = grad_check(lambda t: (norm(t) ** 3).sum(),
                             rng.normal(size=(4, 16)))
            worst = max(worst, err)
        record(key, worst)

    worst = 0.0
    for s in range(seeds):
        rng = np.random.default_rng(300 + s)
        x = rng.normal(size=(5, 7))
        x = x[np.abs(x) > 1e-3].reshape(-1)  # keep away from the kink
        err = grad_check(lambda t: (t.leaky_relu(0.2) ** 2).sum(), x)
        worst = max(worst, err)
    record("leaky_relu", worst)

    worst = 0.0
    for s in range(seeds):
        rng = np.random.default_rng(400 + s)
        tf = TransformerEncoderLayer(8, 2, 16, rng, dtype=np.float64)
        err = grad_check(lambda t: (tf(t) ** 2).sum(), rng.normal(size=(4, 8)))
        worst = max(worst, err)
    record("transformer_layer", worst)

    model = _tiny_model()
    worst = 0.0
    for s in range(seeds):
        rng = np.random.default_rng(500 + s)
        target = rng.integers(0, 4, size=6)

        def ce(t):
            return token_ce_loss(t.T, target, model.codebook)

        err = grad_check(ce, rng.normal(size=(6, 4)))
        worst = max(worst, err)
    record("token_ce_input", worst)

    rng = np.random.default_rng(600)
    x = np.abs(rng.normal(size=(8, 6))) + 0.1
    # Freeze the quantizer at the base point: the straight-through offset
    # (z_q - z) and the commitment target are constants, so the loss is the
    # smooth surrogate whose gradient training actually follows.
    z0 = model.encode(Tensor(x)).data
    _, words0, _ = quantize_batch(z0.T, model.codebook,
                                  model.config.quant_metric)
    offset = words0.T - z0

    def full_loss():
        z = model.encode(Tensor(x))
        x_hat = model.decode(z + Tensor(offset))
        total, _ = vqvae_loss(Tensor(x), x_hat, z, words0.T, model.config)
        return total

    record("full_loss_params",
           param_grad_check(full_loss, model.params(), max_elems=8))

    return results
