"""Self-supervised speech quality scoring (VQScore) and speech enhancement
built on a clean-speech VQ-VAE codebook."""

__version__ = "0.1.0"

from .dsp import AudioClip, StftConfig
from .model import ModelConfig, VqVaeModel, build_model, qe_preset, se_preset
from .scoring import ScoreReport, score_wav, vqscore
from .train import TrainConfig, load_checkpoint, save_checkpoint, train_vqvae

__all__ = [
    "AudioClip", "StftConfig",
    "ModelConfig", "VqVaeModel", "build_model", "qe_preset", "se_preset",
    "ScoreReport", "score_wav", "vqscore",
    "TrainConfig", "load_checkpoint", "save_checkpoint", "train_vqvae",
    "__version__",
]
