"""Experiment harnesses: quality estimation vs. SNR, SE evaluation, and
frame-level quality correlation."""

import numpy as np

from .dsp import StftConfig, frame_snr, magnitude, read_wav, stft
from .enhance import enhance_clip, segmental_snr
from .errors import EmptyManifest
from .scoring import compute_scores, frame_quality
from .stats import pearson_lcc, welch_ttest

CLEAN_SNR_DB = 40.0  # clean rows enter correlations at the frame-SNR clamp

VARIANTS = ("vqscore_cos_z", "vqscore_cos_x", "vqscore_l2_z", "vqscore_l2_x")


def eval_qe(model, rows, stft_cfg=StftConfig()):
    """Score every row, correlate each VQScore variant with SNR, and report
    mean VQScore_(cos,z) per SNR bucket in ascending order."""
    if not rows:
        raise EmptyManifest("no rows to evaluate")
    per_clip = []
    for row in rows:
        path = row.get("noisy_path") or row["clean_path"]
        x = magnitude(stft(read_wav(path), stft_cfg))
        scores = compute_scores(x, model)
        per_clip.append({
            "id": row["id"],
            "snr_db": float(row.get("snr_db", CLEAN_SNR_DB)),
            **{v: scores[v] for v in VARIANTS},
        })
    snrs = np.array([r["snr_db"] for r in per_clip])
    lcc_by_variant = {}
    for v in VARIANTS:
        r, flag = pearson_lcc([c[v] for c in per_clip], snrs, return_flag=True)
        lcc_by_variant[v] = {"lcc": r, "constant_input": flag}
    buckets = sorted(set(snrs))
    bucket_means = [
        float(np.mean([c["vqscore_cos_z"] for c in per_clip if c["snr_db"] == b]))
        for b in buckets
    ]
    return {
        "per_clip": per_clip,
        "lcc_by_variant": lcc_by_variant,
        "snr_buckets": [float(b) for b in buckets],
        "snr_bucket_means": bucket_means,
    }


def eval_se(model, rows, stft_cfg=StftConfig(), frame_len=512, alpha=1.0):
    """Segmental SNR of noisy vs. enhanced against clean, per clip."""
    if not rows:
        raise EmptyManifest("no rows to evaluate")
    per_clip = []
    for row in rows:
        clean = read_wav(row["clean_path"])
        noisy = read_wav(row["noisy_path"])
        enhanced = enhance_clip(noisy, model, stft_cfg, alpha)
        t = stft_cfg.num_frames(len(noisy))
        interior = stft_cfg.interior(t)
        ref = clean.samples[interior]
        snr_in = segmental_snr(ref, noisy.samples[interior], frame_len)
        snr_out = segmental_snr(ref, enhanced.samples, frame_len)
        per_clip.append({
            "id": row["id"],
            "segsnr_in": snr_in,
            "segsnr_out": snr_out,
            "improvement": snr_out - snr_in,
        })
    improvements = np.array([r["improvement"] for r in per_clip])
    summary = {
        "median_improvement": float(np.median(improvements)),
        "fraction_improved": float(np.mean(improvements > 0)),
    }
    ins = [r["segsnr_in"] for r in per_clip]
    outs = [r["segsnr_out"] for r in per_clip]
    if len(per_clip) >= 2:
        summary["welch_vs_noisy"] = welch_ttest(outs, ins)
    return {"per_clip": per_clip, "summary": summary}


def eval_frame_quality(model, rows, stft_cfg=StftConfig()):
    """Per-clip LCC between predicted frame quality and true frame SNR.

    Constant-input clips (e.g. perfect reconstruction hitting the clamp) are
    excluded and counted."""
    if not rows:
        raise EmptyManifest("no rows to evaluate")
    lccs, excluded = [], 0
    for row in rows:
        clean_mag = magnitude(stft(read_wav(row["clean_path"]), stft_cfg))
        noisy_mag = magnitude(stft(read_wav(row["noisy_path"]), stft_cfg))
        x_hat = model.forward(noisy_mag.astype(np.float32)).x_hat.data
        fq = frame_quality(noisy_mag, x_hat)
        fs = frame_snr(clean_mag, noisy_mag)
        r, flag = pearson_lcc(fq, fs, return_flag=True)
        if flag:
            excluded += 1
        else:
            lccs.append(r)
    return {
        "mean_lcc": float(np.mean(lccs)) if lccs else 0.0,
        "per_clip_lcc": lccs,
        "excluded_constant": excluded,
    }
