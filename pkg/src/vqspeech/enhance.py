"""SE inference: noisy wav -> enhanced magnitude -> resynthesis with the
noisy phase, plus a segmental-SNR quality proxy."""

import numpy as np

from .dsp import AudioClip, ComplexSpectrogram, StftConfig, istft, magnitude, read_wav, stft
from .errors import InvalidAlpha, LengthMismatch

SEGSNR_FLOOR_DB = -10.0
SEGSNR_CEIL_DB = 35.0
VOICED_THRESHOLD_DBFS = -60.0


def enhance_clip(clip, model, stft_cfg=StftConfig(), alpha=1.0):
    """Enhance an AudioClip; returns interior-valid samples only.

    alpha is the dry/wet knob: 1.0 = fully enhanced, 0.0 = noisy passthrough.
    """
    if not (0.0 <= alpha <= 1.0):
        raise InvalidAlpha(f"alpha={alpha} outside [0, 1]")
    cspec = stft(clip, stft_cfg)
    mag = magnitude(cspec)
    x_hat = model.forward(mag.astype(np.float32)).x_hat.data.astype(np.float64)
    # reuse noisy phase
    safe = np.maximum(mag, 1e-12)
    out_real = x_hat * cspec.real / safe
    out_imag = x_hat * cspec.imag / safe
    enhanced = istft(ComplexSpectrogram(out_real, out_imag), stft_cfg,
                     sample_rate=clip.sample_rate)
    interior = stft_cfg.interior(mag.shape[1])
    wet = enhanced.samples[interior]
    dry = clip.samples[interior]
    mixed = alpha * wet + (1.0 - alpha) * dry
    return AudioClip(mixed.astype(np.float32), clip.sample_rate)


def enhance_wav(path, model, stft_cfg=StftConfig(), alpha=1.0):
    return enhance_clip(read_wav(path), model, stft_cfg, alpha)


def segmental_snr(reference, processed, frame_len=512):
    """Mean clamped per-frame SNR over voiced frames (ref energy > -60 dBFS)."""
    ref = np.asarray(reference, dtype=np.float64)
    proc = np.asarray(processed, dtype=np.float64)
    if ref.shape != proc.shape:
        raise LengthMismatch(f"{ref.shape} vs {proc.shape}")
    if frame_len <= 0:
        raise ValueError("frame_len must be positive")
    n_frames = ref.size // frame_len
    if n_frames == 0:
        raise LengthMismatch("signal shorter than one frame")
    vals = []
    for i in range(n_frames):
        r = ref[i * frame_len : (i + 1) * frame_len]
        p = proc[i * frame_len : (i + 1) * frame_len]
        power = np.mean(r ** 2)
        if power <= 0 or 10.0 * np.log10(power) <= VOICED_THRESHOLD_DBFS:
            continue
        err = np.sum((r - p) ** 2)
        snr = 10.0 * np.log10(np.sum(r ** 2) / (err + 1e-12))
        vals.append(np.clip(snr, SEGSNR_FLOOR_DB, SEGSNR_CEIL_DB))
    if not vals:
        return float("nan")
    return float(np.mean(vals))
