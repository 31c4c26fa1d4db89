"""VQScore variants and the frame-level quality estimator."""

from dataclasses import dataclass, asdict

import numpy as np

from .dsp import StftConfig, magnitude, read_wav, stft
from .errors import EmptyInput, ShapeMismatch, UntrainedModel

FRAME_QUALITY_EPS = 1e-8
FRAME_QUALITY_CLAMP = 1e4
_NORM_EPS = 0.0  # zero-norm frames are skipped for cosine, not regularized


@dataclass
class ScoreReport:
    utterance_id: str
    vqscore_cos_z: float
    vqscore_cos_x: float
    vqscore_l2_z: float
    vqscore_l2_x: float
    frame_quality: list
    num_frames: int
    skipped_cos_frames: int

    def to_dict(self):
        return asdict(self)


def _mean_cosine(a, b):
    """Mean columnwise cosine of (D, T) arrays, skipping zero-norm columns.

    Returns (mean, skipped count)."""
    na = np.linalg.norm(a, axis=0)
    nb = np.linalg.norm(b, axis=0)
    valid = (na > 0) & (nb > 0)
    skipped = int(np.count_nonzero(~valid))
    if not np.any(valid):
        return 0.0, skipped
    cos = np.sum(a[:, valid] * b[:, valid], axis=0) / (na[valid] * nb[valid])
    return float(np.mean(np.clip(cos, -1.0, 1.0))), skipped


def compute_scores(x, model):
    """All four VQScore variants plus frame quality from one forward pass."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0 or x.shape[1] == 0:
        raise EmptyInput("empty spectrogram")
    if not model.codebook.initialized:
        raise UntrainedModel("codebook was never initialized")
    result = model.forward(x.astype(np.float32))
    z = result.z.data.astype(np.float64)
    z_q = result.z_q.astype(np.float64)
    x_hat = result.x_hat.data.astype(np.float64)

    cos_z, skip_z = _mean_cosine(z, z_q)
    cos_x, skip_x = _mean_cosine(x, x_hat)
    l2_z = float(np.mean(np.linalg.norm(z - z_q, axis=0)))
    l2_x = float(np.mean(np.linalg.norm(x - x_hat, axis=0)))
    return {
        "vqscore_cos_z": cos_z,
        "vqscore_cos_x": cos_x,
        "vqscore_l2_z": l2_z,
        "vqscore_l2_x": l2_x,
        "frame_quality": frame_quality(x, x_hat),
        "skipped_cos_frames": skip_z + skip_x,
        "num_frames": x.shape[1],
    }


def vqscore(x, model, metric="cos", space="z"):
    """Single VQScore variant; (cos, z) is the headline quality metric."""
    if metric not in ("cos", "l2") or space not in ("z", "x"):
        raise ValueError(f"unknown variant ({metric}, {space})")
    return compute_scores(x, model)[f"vqscore_{metric}_{space}"]


def frame_quality(x, x_hat):
    """Per-frame ratio of input norm to residual norm, clamped to [0, 1e4]."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ShapeMismatch(f"{x.shape} vs {x_hat.shape}")
    num = np.linalg.norm(x, axis=0)
    den = np.linalg.norm(x - x_hat, axis=0) + FRAME_QUALITY_EPS
    return np.clip(num / den, 0.0, FRAME_QUALITY_CLAMP)


def score_wav(path, model, stft_cfg=StftConfig(), utterance_id=None):
    clip = read_wav(path)
    x = magnitude(stft(clip, stft_cfg))
    scores = compute_scores(x, model)
    return ScoreReport(
        utterance_id=utterance_id or str(path),
        vqscore_cos_z=scores["vqscore_cos_z"],
        vqscore_cos_x=scores["vqscore_cos_x"],
        vqscore_l2_z=scores["vqscore_l2_z"],
        vqscore_l2_x=scores["vqscore_l2_x"],
        frame_quality=[float(q) for q in scores["frame_quality"]],
        num_frames=scores["num_frames"],
        skipped_cos_frames=scores["skipped_cos_frames"],
    )
