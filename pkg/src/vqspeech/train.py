"""VQ-VAE training loop, validation-based stopping, and checkpoints."""

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import StftConfig, magnitude, read_wav, stft
from .errors import (
    ChecksumMismatch,
    EmptyCorpus,
    EmptyValSet,
    IoError,
    ShapeMismatch,
    VersionMismatch,
)
from .model import VqVaeModel, config_from_dict, config_to_dict
from .nn.optim import Adam
from .nn.tensor import Tensor, cosine_per_column
from .scoring import compute_scores
from .stats import pearson_lcc
from .vq import codebook_usage, commitment_loss, ema_update, kmeans_init

CKPT_MAGIC = b"VQSPKCHK"
CKPT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 8
    crop_frames: int = 128
    max_steps: int = 500
    lr: float = 1e-4
    seed: int = 0
    val_every: int = 0  # 0 disables validation
    early_stop_patience: int = 0  # 0 disables early stopping

    def __post_init__(self):
        if min(self.batch_size, self.crop_frames, self.max_steps) < 1 or self.lr <= 0:
            raise ValueError("batch_size, crop_frames, max_steps, lr must be positive")


@dataclass
class LossBreakdown:
    recon: float
    commit: float
    total: float
    codebook_ema_applied: bool = False


def reconstruction_loss(x, x_hat, kind):
    """Tensor-valued reconstruction term; x may be a constant Tensor."""
    if not isinstance(x, Tensor):
        x = Tensor(np.asarray(x, dtype=x_hat.dtype))
    if x.shape != x_hat.shape:
        raise ShapeMismatch(f"{x.shape} vs {x_hat.shape}")
    if kind == "neg_cosine":
        return -cosine_per_column(x, x_hat).mean()
    if kind == "l1":
        return (x - x_hat).abs().mean()
    if kind == "l2":
        return ((x - x_hat) ** 2).mean()
    raise ValueError(f"unknown reconstruction loss {kind!r}")


def vqvae_loss(x, x_hat, z, z_q, config):
    """Differentiable total plus a float breakdown.

    The codebook term of the training objective is realized by the EMA
    update, not by a gradient, hence total = recon + commit.
    """
    recon = reconstruction_loss(x, x_hat, config.recon_loss)
    commit = commitment_loss(z, z_q, config.beta)
    total = recon + commit
    breakdown = LossBreakdown(
        recon=float(recon.data), commit=float(commit.data), total=float(total.data)
    )
    return total, breakdown


def load_spectrograms(rows, stft_cfg=StftConfig(), key="clean_path"):
    specs = []
    for row in rows:
        clip = read_wav(row[key])
        specs.append(magnitude(stft(clip, stft_cfg)).astype(np.float32))
    return specs


def _sample_crop(spec, crop, rng):
    t = spec.shape[1]
    w = min(crop, t)
    start = int(rng.integers(0, t - w + 1))
    return spec[:, start : start + w]


def train_vqvae(spectrograms, model_config, train_config,
                val_rows=None, stft_cfg=StftConfig(), log_path=None,
                model_seed=None):
    """Step-1 training over clean spectrograms.

    Returns (model, log_rows). Per step: forward, loss, backward, optimizer
    step, EMA codebook update. Codebook is k-means initialized from the
    first batch's embeddings.
    """
    if not spectrograms:
        raise EmptyCorpus("no training spectrograms")
    tc = train_config
    rng = np.random.default_rng(tc.seed)
    model = VqVaeModel(model_config,
                       seed=tc.seed if model_seed is None else model_seed)
    opt = Adam(model.params(), lr=tc.lr)

    def batch_crops():
        idx = rng.integers(0, len(spectrograms), size=tc.batch_size)
        return [_sample_crop(spectrograms[i], tc.crop_frames, rng) for i in idx]

    # codebook init from the first batch(es): keep drawing until there are
    # at least V frames to cluster
    init_frames = []
    while sum(f.shape[0] for f in init_frames) < model_config.v:
        init_frames.extend(model.encode(x).data.T for x in batch_crops())
    frames = np.concatenate(init_frames, axis=0)
    model.codebook = kmeans_init(frames, model_config.v, seed=tc.seed)

    log_rows = []
    log_file = open(log_path, "w") if log_path else None
    best_val, best_state, since_best = -np.inf, None, 0
    try:
        for step in range(1, tc.max_steps + 1):
            crops = batch_crops()
            opt.zero_grad()
            total = None
            recon_sum = commit_sum = 0.0
            all_frames, all_assign = [], []
            for x in crops:
                res = model.forward(x)
                loss, breakdown = vqvae_loss(
                    Tensor(x), res.x_hat, res.z, res.z_q, model_config
                )
                total = loss if total is None else total + loss
                recon_sum += breakdown.recon
                commit_sum += breakdown.commit
                all_frames.append(res.z.data.T)
                all_assign.append(res.indices)
            (total * (1.0 / tc.batch_size)).backward()
            opt.step()
            assign = np.concatenate(all_assign)
            ema_update(model.codebook, assign, np.concatenate(all_frames, axis=0))

            row = {
                "step": step,
                "recon": recon_sum / tc.batch_size,
                "commit": commit_sum / tc.batch_size,
                "perplexity": codebook_usage(assign, model_config.v)["perplexity"],
            }
            if val_rows and tc.val_every and step % tc.val_every == 0:
                row["val_lcc"] = validate_qe(model, val_rows, stft_cfg)
                if row["val_lcc"] > best_val:
                    best_val, since_best = row["val_lcc"], 0
                    best_state = _snapshot(model)
                else:
                    since_best += 1
                    if tc.early_stop_patience and since_best >= tc.early_stop_patience:
                        log_rows.append(row)
                        if log_file:
                            log_file.write(json.dumps(row) + "\n")
                        break
            log_rows.append(row)
            if log_file:
                log_file.write(json.dumps(row) + "\n")
    finally:
        if log_file:
            log_file.close()
    if best_state is not None and best_val > -np.inf:
        _restore(model, best_state)
    return model, log_rows


def _snapshot(model):
    return (
        {n: p.data.copy() for n, p in model.params().items()},
        model.codebook.copy(),
    )


def _restore(model, state):
    params, codebook = state
    for n, p in model.params().items():
        p.data[...] = params[n]
    model.codebook = codebook.copy()


def train_qe(rows, model_config, train_config, val_rows=None,
             stft_cfg=StftConfig(), log_path=None):
    """Convenience wrapper: manifest rows of clean clips -> trained model."""
    specs = load_spectrograms(rows, stft_cfg)
    return train_vqvae(specs, model_config, train_config, val_rows=val_rows,
                       stft_cfg=stft_cfg, log_path=log_path)


def validate_qe(model, val_rows, stft_cfg=StftConfig()):
    """Pearson LCC between VQScore_(cos,z) and the known mixing SNR."""
    if not val_rows:
        raise EmptyValSet("no validation rows")
    scores, snrs = [], []
    for row in val_rows:
        path = row.get("noisy_path") or row["clean_path"]
        clip = read_wav(path)
        x = magnitude(stft(clip, stft_cfg))
        scores.append(compute_scores(x, model)["vqscore_cos_z"])
        snrs.append(row.get("snr_db", 40.0))
    return pearson_lcc(scores, snrs)


# -- checkpoint persistence ----------------------------------------------------

_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


def _model_tensors(model):
    tensors = {name: p.data for name, p in model.params().items()}
    cb = model.codebook
    tensors["codebook.vectors"] = cb.vectors
    tensors["codebook.ema_counts"] = cb.ema_counts
    tensors["codebook.ema_sums"] = cb.ema_sums
    return tensors


def save_checkpoint(model, path):
    tensors = _model_tensors(model)
    directory = []
    blobs = []
    offset = 0
    for name, arr in tensors.items():
        raw = np.ascontiguousarray(arr, dtype=f"<f{arr.dtype.itemsize}").tobytes()
        directory.append({
            "name": name,
            "dtype": f"<f{arr.dtype.itemsize}",
            "shape": list(arr.shape),
            "offset": offset,
            "length": len(raw),
        })
        blobs.append(raw)
        offset += len(raw)
    meta = {
        "config": config_to_dict(model.config),
        "codebook": {
            "decay": model.codebook.decay,
            "laplace_eps": model.codebook.laplace_eps,
            "initialized": model.codebook.initialized,
        },
        "tensors": directory,
    }
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    body = (
        CKPT_MAGIC
        + struct.pack("<I", CKPT_VERSION)
        + struct.pack("<I", len(meta_bytes))
        + meta_bytes
        + b"".join(blobs)
    )
    crc = zlib.crc32(body) & 0xFFFFFFFF
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            f.write(body + struct.pack("<I", crc))
    except OSError as e:
        raise IoError(str(e)) from e


def read_checkpoint_meta(path):
    """Verify framing + CRC and return (version, metadata, blob_bytes)."""
    try:
        data = open(path, "rb").read()
    except OSError as e:
        raise IoError(str(e)) from e
    if len(data) < len(CKPT_MAGIC) + 12 or data[: len(CKPT_MAGIC)] != CKPT_MAGIC:
        raise ChecksumMismatch("not a checkpoint file (bad magic)")
    (stored_crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != stored_crc:
        raise ChecksumMismatch("CRC32 mismatch (truncated or corrupted file)")
    pos = len(CKPT_MAGIC)
    (version,) = struct.unpack("<I", data[pos : pos + 4])
    if version != CKPT_VERSION:
        raise VersionMismatch(f"checkpoint version {version}, expected {CKPT_VERSION}")
    (meta_len,) = struct.unpack("<I", data[pos + 4 : pos + 8])
    meta_start = pos + 8
    meta = json.loads(data[meta_start : meta_start + meta_len].decode("utf-8"))
    blobs = data[meta_start + meta_len : -4]
    return version, meta, blobs


def load_checkpoint(path):
    _, meta, blobs = read_checkpoint_meta(path)
    config = config_from_dict(meta["config"])
    model = VqVaeModel(config, seed=0)
    arrays = {}
    for entry in meta["tensors"]:
        dtype = _DTYPES[entry["dtype"]]
        raw = blobs[entry["offset"] : entry["offset"] + entry["length"]]
        arrays[entry["name"]] = np.frombuffer(raw, dtype=dtype).reshape(
            entry["shape"]
        ).copy()
    params = model.params()
    for name, p in params.items():
        p.data[...] = arrays[name]
    cb = model.codebook
    cb.vectors[...] = arrays["codebook.vectors"]
    cb.ema_counts[...] = arrays["codebook.ema_counts"]
    cb.ema_sums[...] = arrays["codebook.ema_sums"]
    cb.decay = meta["codebook"]["decay"]
    cb.laplace_eps = meta["codebook"]["laplace_eps"]
    cb.initialized = meta["codebook"]["initialized"]
    return model
