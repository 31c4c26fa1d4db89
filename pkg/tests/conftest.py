import numpy as np
import pytest

from vqspeech.dsp import AudioClip
from vqspeech.model import VqVaeModel, qe_preset
from vqspeech.vq import kmeans_init

# Small enough to train/evaluate in milliseconds; f_bins=33 matches fft_size=64.
TINY_QE = dict(v=16, d=8, c1=12, c2=10, f_bins=33)


def make_tiny_model(seed=0, **overrides):
    cfg = qe_preset(**{**TINY_QE, **overrides})
    model = VqVaeModel(cfg, seed=seed)
    rng = np.random.default_rng(seed)
    specs = rng.uniform(0.0, 1.0, size=(2, cfg.f_bins, 40)).astype(np.float32)
    frames = np.concatenate([model.encode(s).data.T for s in specs])
    model.codebook = kmeans_init(frames, cfg.v, seed=seed)
    return model


@pytest.fixture(scope="session")
def tiny_model():
    return make_tiny_model()


def sine_clip(freq=440.0, duration_s=0.5, sample_rate=16000, amp=0.4):
    t = np.arange(int(duration_s * sample_rate)) / sample_rate
    return AudioClip((amp * np.sin(2 * np.pi * freq * t)).astype(np.float32),
                     sample_rate)


def random_clip(seed, duration_s=0.5, sample_rate=16000, amp=0.5):
    rng = np.random.default_rng(seed)
    n = int(duration_s * sample_rate)
    return AudioClip((amp * rng.uniform(-1, 1, n)).astype(np.float32),
                     sample_rate)
