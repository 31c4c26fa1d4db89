"""Evaluation harnesses over a tiny corpus and model."""

import numpy as np
import pytest

from conftest import make_tiny_model
from vqspeech.corpus import make_noisy_set, synth_clean
from vqspeech.dsp import StftConfig
from vqspeech.errors import EmptyManifest
from vqspeech.evaluate import eval_frame_quality, eval_qe, eval_se

SMALL_STFT = StftConfig(fft_size=64, win_length=64, hop=32)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("eval_corpus")
    clean = synth_clean(2, seed=11, out_dir=root, duration_s=0.5)
    noisy = make_noisy_set(clean, snrs=[0.0, 10.0], kinds=["white"], seed=11,
                           out_dir=root)
    return clean, noisy


@pytest.fixture(scope="module")
def model():
    return make_tiny_model(seed=6)


def test_eval_qe_report_structure(model, corpus):
    clean, noisy = corpus
    rows = noisy + clean  # clean rows count as the top SNR bucket
    report = eval_qe(model, rows, SMALL_STFT)
    assert len(report["per_clip"]) == len(rows)
    assert report["snr_buckets"] == [0.0, 10.0, 40.0]
    assert len(report["snr_bucket_means"]) == 3
    for v, entry in report["lcc_by_variant"].items():
        assert -1.0 <= entry["lcc"] <= 1.0
        assert isinstance(entry["constant_input"], bool)
    # bucket means are the arithmetic means of per-clip cos-z scores
    zero = [c["vqscore_cos_z"] for c in report["per_clip"] if c["snr_db"] == 0.0]
    assert np.isclose(report["snr_bucket_means"][0], np.mean(zero))


def test_eval_qe_empty_rejected(model):
    with pytest.raises(EmptyManifest):
        eval_qe(model, [], SMALL_STFT)


def test_eval_se_report_and_identity_control(model, corpus):
    _, noisy = corpus
    report = eval_se(model, noisy, SMALL_STFT, frame_len=256)
    assert len(report["per_clip"]) == len(noisy)
    for row in report["per_clip"]:
        assert np.isclose(row["improvement"],
                          row["segsnr_out"] - row["segsnr_in"])
    assert 0.0 <= report["summary"]["fraction_improved"] <= 1.0
    assert "welch_vs_noisy" in report["summary"]
    # alpha=0 passes the noisy signal through: exactly zero improvement
    ident = eval_se(model, noisy, SMALL_STFT, frame_len=256, alpha=0.0)
    assert all(np.isclose(r["improvement"], 0.0, atol=1e-9)
               for r in ident["per_clip"])
    assert np.isclose(ident["summary"]["median_improvement"], 0.0, atol=1e-9)


def test_eval_frame_quality_report(model, corpus):
    _, noisy = corpus
    report = eval_frame_quality(model, noisy, SMALL_STFT)
    assert len(report["per_clip_lcc"]) + report["excluded_constant"] == len(noisy)
    assert all(-1.0 <= r <= 1.0 for r in report["per_clip_lcc"])
    if report["per_clip_lcc"]:
        assert np.isclose(report["mean_lcc"], np.mean(report["per_clip_lcc"]))
