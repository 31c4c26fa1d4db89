"""QE and SE model variants: encoder, quantizer, decoder."""

from dataclasses import dataclass, replace, asdict

import numpy as np

from .errors import InvalidConfig, ShapeMismatch
from .nn.layers import Conv1d, InstanceNorm, TransformerEncoderLayer
from .nn.tensor import Tensor
from .vq import Codebook, quantize_batch, straight_through


@dataclass(frozen=True)
class ModelConfig:
    v: int  # codebook size
    d: int  # code dimension
    c1: int
    c2: int
    k: int = 7
    use_transformer: bool = False
    in_mode: str = "full"  # full | mean_only
    quant_metric: str = "cos"  # l2 | cos
    recon_loss: str = "neg_cosine"  # neg_cosine | l1 | l2
    beta: float = 1.0
    f_bins: int = 257
    heads: int = 8
    leaky_slope: float = 0.2

    def __post_init__(self):
        if self.in_mode not in ("full", "mean_only"):
            raise InvalidConfig(f"in_mode {self.in_mode!r}")
        if self.quant_metric not in ("l2", "cos"):
            raise InvalidConfig(f"quant_metric {self.quant_metric!r}")
        if self.recon_loss not in ("neg_cosine", "l1", "l2"):
            raise InvalidConfig(f"recon_loss {self.recon_loss!r}")
        if min(self.v, self.d, self.c1, self.c2, self.f_bins) < 2:
            raise InvalidConfig("v, d, c1, c2, f_bins must all be >= 2")
        if self.k % 2 != 1:
            raise InvalidConfig("kernel size must be odd")
        if self.use_transformer and self.d % self.heads != 0:
            raise InvalidConfig(f"d={self.d} not divisible by heads={self.heads}")

    @property
    def ff_dim(self):
        return 4 * self.d


def qe_preset(**overrides):
    cfg = ModelConfig(v=2048, d=32, c1=128, c2=64, use_transformer=False,
                      in_mode="full", quant_metric="cos",
                      recon_loss="neg_cosine", beta=1.0)
    return replace(cfg, **overrides) if overrides else cfg


def se_preset(**overrides):
    cfg = ModelConfig(v=4096, d=128, c1=200, c2=150, use_transformer=True,
                      in_mode="mean_only", quant_metric="l2",
                      recon_loss="l1", beta=3.0)
    return replace(cfg, **overrides) if overrides else cfg


@dataclass
class ForwardResult:
    z: Tensor  # (d, T)
    indices: np.ndarray  # (T,)
    z_q: np.ndarray  # (d, T)
    x_hat: Tensor  # (F, T)
    degenerate_frames: int


class VqVaeModel:
    def __init__(self, config, seed=0, dtype=np.float32):
        self.config = config
        rng = np.random.default_rng(seed)
        c = config
        mode = c.in_mode
        self.enc_in_norm = InstanceNorm(c.f_bins, mode, dtype=dtype)
        self.enc_convs = [
            Conv1d(c.f_bins, c.c1, c.k, rng, dtype),
            Conv1d(c.c1, c.c2, c.k, rng, dtype),
            Conv1d(c.c2, c.d, c.k, rng, dtype),
        ]
        self.enc_norms = [
            InstanceNorm(c.c1, mode, dtype=dtype),
            InstanceNorm(c.c2, mode, dtype=dtype),
        ]
        self.dec_convs = [
            Conv1d(c.d, c.c2, c.k, rng, dtype),
            Conv1d(c.c2, c.c1, c.k, rng, dtype),
            Conv1d(c.c1, c.f_bins, c.k, rng, dtype),
        ]
        self.dec_norms = [
            InstanceNorm(c.c2, mode, dtype=dtype),
            InstanceNorm(c.c1, mode, dtype=dtype),
        ]
        if c.use_transformer:
            self.enc_tf = [
                TransformerEncoderLayer(c.d, c.heads, c.ff_dim, rng,
                                        c.leaky_slope, dtype)
                for _ in range(2)
            ]
            self.dec_tf = [
                TransformerEncoderLayer(c.d, c.heads, c.ff_dim, rng,
                                        c.leaky_slope, dtype)
                for _ in range(2)
            ]
        else:
            self.enc_tf = []
            self.dec_tf = []
        self.codebook = Codebook.empty(c.v, c.d, dtype=dtype)

    # -- parameter access -------------------------------------------------

    def encoder_params(self):
        out = {}
        for k, p in self.enc_in_norm.params().items():
            out[f"enc.in_norm.{k}"] = p
        for i, conv in enumerate(self.enc_convs):
            for k, p in conv.params().items():
                out[f"enc.conv{i}.{k}"] = p
        for i, norm in enumerate(self.enc_norms):
            for k, p in norm.params().items():
                out[f"enc.norm{i}.{k}"] = p
        for i, tf in enumerate(self.enc_tf):
            for k, p in tf.params().items():
                out[f"enc.tf{i}.{k}"] = p
        return out

    def decoder_params(self):
        out = {}
        for i, tf in enumerate(self.dec_tf):
            for k, p in tf.params().items():
                out[f"dec.tf{i}.{k}"] = p
        for i, conv in enumerate(self.dec_convs):
            for k, p in conv.params().items():
                out[f"dec.conv{i}.{k}"] = p
        for i, norm in enumerate(self.dec_norms):
            for k, p in norm.params().items():
                out[f"dec.norm{i}.{k}"] = p
        return out

    def params(self):
        out = self.encoder_params()
        out.update(self.decoder_params())
        return out

    # -- forward ------------------------------------------------------------

    def _as_tensor(self, x):
        if isinstance(x, Tensor):
            return x
        return Tensor(np.asarray(x, dtype=np.float32))

    def encode(self, x):
        """(F, T) spectrogram -> (d, T) embeddings."""
        x = self._as_tensor(x)
        if x.shape[0] != self.config.f_bins:
            raise ShapeMismatch(
                f"input has {x.shape[0]} bins, model expects {self.config.f_bins}"
            )
        slope = self.config.leaky_slope
        h = self.enc_in_norm(x)
        h = self.enc_convs[0](h)
        h = self.enc_norms[0](h).leaky_relu(slope)
        h = self.enc_convs[1](h)
        h = self.enc_norms[1](h).leaky_relu(slope)
        h = self.enc_convs[2](h)
        if self.enc_tf:
            h = h.T  # (T, d)
            for tf in self.enc_tf:
                h = tf(h)
            h = h.T
        return h

    def decode(self, z_q):
        """(d, T) quantized embeddings -> (F, T) non-negative magnitudes."""
        z_q = self._as_tensor(z_q)
        if z_q.shape[0] != self.config.d:
            raise ShapeMismatch(
                f"input has {z_q.shape[0]} rows, model expects {self.config.d}"
            )
        slope = self.config.leaky_slope
        h = z_q
        if self.dec_tf:
            h = h.T
            for tf in self.dec_tf:
                h = tf(h)
            h = h.T
        h = self.dec_convs[0](h)
        h = self.dec_norms[0](h).leaky_relu(slope)
        h = self.dec_convs[1](h)
        h = self.dec_norms[1](h).leaky_relu(slope)
        h = self.dec_convs[2](h)
        return h.softplus()

    def quantize(self, z_data):
        """Per-frame quantization of (d, T) embedding data by config metric."""
        idx, words, degenerate = quantize_batch(
            z_data.T, self.codebook, self.config.quant_metric
        )
        return idx, words.T.astype(z_data.dtype), int(degenerate.sum())

    def forward(self, x):
        z = self.encode(x)
        indices, z_q, degenerate = self.quantize(z.data)
        st = straight_through(z, z_q)
        x_hat = self.decode(st)
        return ForwardResult(z=z, indices=indices, z_q=z_q, x_hat=x_hat,
                             degenerate_frames=degenerate)


def build_model(config, seed=0, dtype=np.float32):
    return VqVaeModel(config, seed=seed, dtype=dtype)


def count_params(model, include_codebook=False):
    n = sum(p.data.size for p in model.params().values())
    if include_codebook:
        n += model.codebook.vectors.size
    return int(n)


def config_to_dict(config):
    return asdict(config)


def config_from_dict(d):
    return ModelConfig(**d)
