"""Audio I/O, STFT analysis/synthesis, SNR mixing, and frame-level SNR."""

import wave
from dataclasses import dataclass

import numpy as np

from .errors import (
    ClipTooShort,
    IoError,
    MalformedHeader,
    NonColaConfig,
    ShapeMismatch,
    SilentClean,
    SilentNoise,
    UnsupportedFormat,
)

FRAME_SNR_EPS = 1e-12
FRAME_SNR_CLAMP_DB = 40.0


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray  # float32 in [-1, 1]
    sample_rate: int = 16000

    def __post_init__(self):
        object.__setattr__(
            self, "samples", np.asarray(self.samples, dtype=np.float32)
        )
        if self.samples.size == 0:
            raise ShapeMismatch("empty clip")
        if not np.all(np.isfinite(self.samples)):
            raise ShapeMismatch("non-finite samples")
        if self.sample_rate <= 0:
            raise ShapeMismatch("sample_rate must be positive")

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 512
    win_length: int = 512
    hop: int = 256

    def __post_init__(self):
        if not (0 < self.hop <= self.win_length <= self.fft_size):
            raise NonColaConfig("require hop <= win_length <= fft_size, all > 0")

    @property
    def bins(self):
        return self.fft_size // 2 + 1

    def window(self):
        # periodic Hann
        n = np.arange(self.win_length)
        return (0.5 - 0.5 * np.cos(2 * np.pi * n / self.win_length)).astype(np.float64)

    def num_frames(self, n_samples):
        if n_samples < self.win_length:
            raise ClipTooShort(
                f"clip of {n_samples} samples shorter than window {self.win_length}"
            )
        return 1 + (n_samples - self.win_length) // self.hop

    def interior(self, n_frames):
        """Slice of sample indices fully covered by overlapping windows."""
        start = self.win_length - self.hop
        stop = (n_frames - 1) * self.hop + self.hop
        return slice(start, max(start, stop))


@dataclass(frozen=True)
class ComplexSpectrogram:
    real: np.ndarray
    imag: np.ndarray

    @property
    def values(self):
        return self.real + 1j * self.imag


def read_wav(path):
    """Read a mono 16-bit PCM RIFF/WAVE file."""
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            sampwidth = wf.getsampwidth()
            comptype = wf.getcomptype()
            rate = wf.getframerate()
            n = wf.getnframes()
            raw = wf.readframes(n)
    except wave.Error as e:
        raise MalformedHeader(str(e)) from e
    except OSError as e:
        raise IoError(str(e)) from e
    if comptype != "NONE":
        raise UnsupportedFormat(f"compression {comptype!r} not supported")
    if n_channels != 1:
        raise UnsupportedFormat(f"{n_channels} channels; only mono supported")
    if sampwidth != 2:
        raise UnsupportedFormat(f"{8 * sampwidth}-bit samples; only 16-bit supported")
    ints = np.frombuffer(raw, dtype="<i2")
    return AudioClip(ints.astype(np.float32) / 32768.0, sample_rate=rate)


def write_wav(clip, path):
    """Write mono 16-bit PCM; samples clamped to [-1, 1]."""
    x = np.clip(clip.samples.astype(np.float64) * 32768.0, -32768, 32767)
    ints = np.round(x).astype("<i2")
    try:
        with wave.open(str(path), "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(2)
            wf.setframerate(clip.sample_rate)
            wf.writeframes(ints.tobytes())
    except OSError as e:
        raise IoError(str(e)) from e


def stft(clip, cfg=StftConfig()):
    """Windowed DFT per frame, no padding: T = 1 + (len - win) // hop."""
    x = clip.samples.astype(np.float64)
    t = cfg.num_frames(x.size)
    win = cfg.window()
    idx = np.arange(cfg.win_length)[None, :] + cfg.hop * np.arange(t)[:, None]
    frames = x[idx] * win
    spec = np.fft.rfft(frames, n=cfg.fft_size, axis=1).T  # (F, T)
    return ComplexSpectrogram(np.ascontiguousarray(spec.real),
                              np.ascontiguousarray(spec.imag))


def magnitude(cspec):
    return np.sqrt(cspec.real ** 2 + cspec.imag ** 2)


def istft(cspec, cfg=StftConfig(), sample_rate=16000):
    """Overlap-add synthesis with window-squared normalization."""
    spec = cspec.values
    f, t = spec.shape
    if f != cfg.bins:
        raise ShapeMismatch(f"{f} bins, config expects {cfg.bins}")
    win = cfg.window()
    frames = np.fft.irfft(spec.T, n=cfg.fft_size, axis=1)[:, : cfg.win_length]
    frames *= win
    n = (t - 1) * cfg.hop + cfg.win_length
    out = np.zeros(n)
    wsum = np.zeros(n)
    for i in range(t):
        s = i * cfg.hop
        out[s : s + cfg.win_length] += frames[i]
        wsum[s : s + cfg.win_length] += win ** 2
    interior = cfg.interior(t)
    if np.any(wsum[interior] < 1e-8):
        raise NonColaConfig("window/hop combination leaves uncovered samples")
    nz = wsum > 1e-8
    out[nz] /= wsum[nz]
    return AudioClip(out.astype(np.float32), sample_rate=sample_rate)


def mix_at_snr(clean, noise, snr_db, seed=0):
    """Scale noise against clean to hit snr_db; returns (noisy, scaled_noise).

    Noise shorter than clean is looped, longer is cropped, starting from a
    seed-derived offset.
    """
    c = clean.samples.astype(np.float64)
    n = noise.samples.astype(np.float64)
    e_clean = np.sum(c ** 2)
    if e_clean <= 0:
        raise SilentClean("clean signal has zero energy")
    if np.sum(n ** 2) <= 0:
        raise SilentNoise("noise signal has zero energy")
    rng = np.random.default_rng(seed)
    offset = int(rng.integers(0, n.size))
    reps = int(np.ceil((c.size + offset) / n.size))
    n = np.tile(n, reps)[offset : offset + c.size]
    e_noise = np.sum(n ** 2)
    if e_noise <= 0:
        raise SilentNoise("selected noise segment has zero energy")
    scale = np.sqrt(e_clean / e_noise) * 10.0 ** (-snr_db / 20.0)
    scaled = n * scale
    noisy = c + scaled
    sr = clean.sample_rate
    return (
        AudioClip(noisy.astype(np.float32), sr),
        AudioClip(scaled.astype(np.float32), sr),
    )


def frame_snr(clean_mag, noisy_mag):
    """Per-frame SNR in dB on magnitude spectrograms, clamped to +/-40 dB."""
    clean_mag = np.asarray(clean_mag, dtype=np.float64)
    noisy_mag = np.asarray(noisy_mag, dtype=np.float64)
    if clean_mag.shape != noisy_mag.shape:
        raise ShapeMismatch(f"{clean_mag.shape} vs {noisy_mag.shape}")
    sig = np.sum(clean_mag ** 2, axis=0)
    err = np.sum((clean_mag - noisy_mag) ** 2, axis=0)
    snr = 10.0 * np.log10(sig / (err + FRAME_SNR_EPS) + FRAME_SNR_EPS)
    return np.clip(snr, -FRAME_SNR_CLAMP_DB, FRAME_SNR_CLAMP_DB)
