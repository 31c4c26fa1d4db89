"""Deterministic synthetic clean-speech-like corpus and noisy derivatives.

Every clip is fully determined by (seed, index), so manifests and files are
byte-reproducible.
"""

import json
from pathlib import Path

import numpy as np

from .dsp import AudioClip, mix_at_snr, write_wav
from .errors import EmptyManifest

SAMPLE_RATE = 16000
NOISE_KINDS = ("white", "pink", "babble")


def save_manifest(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True) + "\n")


def load_manifest(path):
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    if not rows:
        raise EmptyManifest(str(path))
    return rows


def _clip_rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def _voice(rng, n, sr):
    """One synthetic voiced clip: drifting-f0 harmonics shaped by slowly
    moving resonant peaks and a syllabic amplitude envelope."""
    t = np.arange(n) / sr
    f0_a, f0_b = rng.uniform(90.0, 300.0, size=2)
    f0 = f0_a + (f0_b - f0_a) * (t / t[-1])
    phase0 = 2 * np.pi * np.cumsum(f0) / sr
    n_harm = int(rng.integers(3, 7))

    n_peaks = int(rng.integers(2, 4))
    mu_a = rng.uniform(200.0, 3000.0, size=n_peaks)
    mu_b = mu_a * rng.uniform(0.8, 1.2, size=n_peaks)
    sigma = rng.uniform(150.0, 500.0, size=n_peaks)
    gains = rng.uniform(0.4, 1.0, size=n_peaks)

    x = np.zeros(n)
    for h in range(1, n_harm + 1):
        fh = h * f0
        amp = np.full(n, 0.05)
        for j in range(n_peaks):
            mu = mu_a[j] + (mu_b[j] - mu_a[j]) * (t / t[-1])
            amp += gains[j] * np.exp(-((fh - mu) ** 2) / (2 * sigma[j] ** 2))
        x += amp * np.sin(h * phase0 + rng.uniform(0, 2 * np.pi))

    rate = rng.uniform(4.0, 8.0)
    env = (0.5 + 0.5 * np.sin(2 * np.pi * rate * t + rng.uniform(0, 2 * np.pi))) ** 1.5
    x *= 0.15 + 0.85 * env
    peak = np.max(np.abs(x))
    if peak > 0:
        x *= 0.5 / peak
    return x


def synth_clean(n, seed, out_dir, duration_s=2.0, sample_rate=SAMPLE_RATE):
    """Generate n clean clips under out_dir and return the manifest rows."""
    out_dir = Path(out_dir)
    clean_dir = out_dir / "clean"
    clean_dir.mkdir(parents=True, exist_ok=True)
    n_samples = int(round(duration_s * sample_rate))
    rows = []
    for i in range(n):
        rng = _clip_rng(seed, 0, i)
        clip = AudioClip(_voice(rng, n_samples, sample_rate).astype(np.float32),
                         sample_rate)
        cid = f"clean_{i:04d}"
        path = clean_dir / f"{cid}.wav"
        write_wav(clip, path)
        rows.append({
            "id": cid,
            "clean_path": str(path),
            "seed": seed,
            "duration_s": duration_s,
        })
    save_manifest(rows, out_dir / "clean.jsonl")
    return rows


def synth_noise(kind, duration_s, seed, sample_rate=SAMPLE_RATE):
    if kind not in NOISE_KINDS:
        raise ValueError(f"unknown noise kind {kind!r}")
    n = int(round(duration_s * sample_rate))
    rng = _clip_rng(seed, 1)
    if kind == "white":
        x = rng.uniform(-1.0, 1.0, size=n)
    elif kind == "pink":
        white = rng.uniform(-1.0, 1.0, size=n)
        spec = np.fft.rfft(white)
        freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
        shape = np.ones_like(freqs)
        shape[1:] = 1.0 / np.sqrt(freqs[1:])
        shape[0] = 0.0
        x = np.fft.irfft(spec * shape, n=n)
    else:  # babble: sum of independent synthetic voices
        x = np.zeros(n)
        for j in range(8):
            vr = _clip_rng(seed, 1, j)
            x += _voice(vr, n, sample_rate)
    peak = np.max(np.abs(x))
    if peak > 0:
        x = x / peak * 0.5
    return AudioClip(x.astype(np.float32), sample_rate)


def make_noisy_set(clean_rows, snrs, kinds, seed, out_dir):
    """|clean| x |snrs| x |kinds| mixtures via mix_at_snr, with exact labels."""
    out_dir = Path(out_dir)
    noisy_dir = out_dir / "noisy"
    noisy_dir.mkdir(parents=True, exist_ok=True)
    from .dsp import read_wav

    rows = []
    for ci, crow in enumerate(clean_rows):
        clean = read_wav(crow["clean_path"])
        for ki, kind in enumerate(kinds):
            for si, snr in enumerate(snrs):
                sub = int(_clip_rng(seed, 2, ci, ki, si).integers(0, 2**31 - 1))
                noise = synth_noise(kind, crow["duration_s"], sub,
                                    clean.sample_rate)
                noisy, _ = mix_at_snr(clean, noise, snr, seed=sub)
                nid = f"{crow['id']}_{kind}_{snr:+g}dB"
                path = noisy_dir / f"{nid}.wav"
                write_wav(noisy, path)
                rows.append({
                    "id": nid,
                    "clean_path": crow["clean_path"],
                    "noisy_path": str(path),
                    "noise_kind": kind,
                    "snr_db": float(snr),
                    "seed": sub,
                    "duration_s": crow["duration_s"],
                })
    save_manifest(rows, out_dir / "noisy.jsonl")
    return rows
