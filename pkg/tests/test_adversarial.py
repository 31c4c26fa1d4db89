"""Adversarial self-distillation: token CE, the PGD attack, frozen teacher."""

import numpy as np
import pytest

from conftest import TINY_QE, make_tiny_model
from vqspeech.adversarial import (
    AttackConfig,
    attack,
    code_accuracy,
    default_epsilon,
    distill_step,
    gaussian_baseline_step,
    make_distill_state,
    run_step2,
    teacher_tokens,
    token_ce_loss,
)
from vqspeech.nn.optim import Adam
from vqspeech.nn.tensor import Tensor
from vqspeech.train import TrainConfig
from vqspeech.vq import Codebook

RNG = np.random.default_rng(0)


def _book(vectors):
    v = np.asarray(vectors, dtype=np.float64)
    return Codebook(v.copy(), np.zeros(len(v)), np.zeros_like(v))


def _specs(n=3, t=24, seed=0):
    rng = np.random.default_rng(seed)
    return [
        np.abs(rng.normal(size=(TINY_QE["f_bins"], t))).astype(np.float32)
        for _ in range(n)
    ]


# -- token cross-entropy ---------------------------------------------------------


def test_token_ce_equidistant_is_log_v():
    # embedding equidistant from both codes -> uniform over 2 -> CE = ln 2
    book = _book([[1.0, 0.0], [-1.0, 0.0]])
    e = Tensor(np.array([[0.0], [0.0]]))  # (d=2, T=1)
    loss = token_ce_loss(e, np.array([0]), book)
    assert np.isclose(float(loss.data), np.log(2.0), atol=1e-6)


def test_token_ce_near_zero_on_target():
    # far-apart codes, embedding on the target -> near-deterministic token
    book = _book([[0.0, 0.0], [100.0, 0.0]])
    e = Tensor(np.array([[0.0], [0.0]]))
    loss = token_ce_loss(e, np.array([0]), book)
    assert float(loss.data) < 1e-6


def test_token_ce_matches_naive_softmax_oracle():
    rng = np.random.default_rng(1)
    book = _book(rng.normal(size=(7, 4)))
    e = rng.normal(size=(4, 9))
    target = rng.integers(0, 7, size=9)
    got = float(token_ce_loss(Tensor(e), target, book).data)

    dists = np.sqrt(
        ((e.T[:, None, :] - book.vectors[None]) ** 2).sum(axis=2) + 1e-12
    )
    logits = -dists
    p = np.exp(logits - logits.max(axis=1, keepdims=True))
    p /= p.sum(axis=1, keepdims=True)
    want = -np.mean(np.log(p[np.arange(9), target]))
    assert np.isclose(got, want, atol=1e-6)


def test_token_ce_rejects_bad_targets():
    book = _book(RNG.normal(size=(4, 3)))
    from vqspeech.errors import IndexOutOfRange

    with pytest.raises(IndexOutOfRange):
        token_ce_loss(Tensor(np.zeros((3, 2))), np.array([0, 4]), book)


# -- attack -------------------------------------------------------------------------


def test_attack_config_validation():
    with pytest.raises(ValueError):
        AttackConfig(eps=0.1, steps=0)
    with pytest.raises(ValueError):
        AttackConfig(eps=-1.0)
    cfg = AttackConfig(eps=0.2)
    assert cfg.alpha == 0.1


def test_default_epsilon_is_relative_to_peaks():
    specs = [np.full((3, 3), 2.0), np.full((3, 3), 4.0)]
    assert np.isclose(default_epsilon(specs, rel=0.01), 0.03)


def test_attack_respects_budget_and_raises_loss():
    teacher = make_tiny_model(seed=0)
    state = make_distill_state(teacher)
    cfg = AttackConfig(eps=0.05, steps=3)
    raised = 0
    for x in _specs(5):
        target = teacher_tokens(teacher, x)
        delta = attack(state, x, cfg, target_idx=target)
        assert np.max(np.abs(delta)) <= cfg.eps + 1e-7
        before = float(
            token_ce_loss(state.student.encode(Tensor(x)), target,
                          state.student.codebook).data
        )
        after = float(
            token_ce_loss(state.student.encode(Tensor(x + delta)), target,
                          state.student.codebook).data
        )
        raised += after > before
    assert raised >= 4  # monotone in practice; allow one tie


# -- distillation -------------------------------------------------------------------


def _quick_state():
    teacher = make_tiny_model(seed=1)
    return make_distill_state(teacher, lambda_dec=1.0)


def test_student_starts_as_exact_copy():
    state = _quick_state()
    for name, p in state.teacher.params().items():
        assert np.array_equal(p.data, state.student.params()[name].data)
    assert np.array_equal(state.teacher.codebook.vectors,
                          state.student.codebook.vectors)


def test_distill_step_updates_student_not_teacher_or_codebook():
    state = _quick_state()
    x = _specs(1)[0]
    opt = Adam(
        {**state.student.encoder_params(), **state.student.decoder_params()},
        lr=1e-3,
    )
    teacher_before = {n: p.data.copy() for n, p in state.teacher.params().items()}
    cb_before = state.student.codebook.vectors.copy()
    losses = distill_step(state, x, np.zeros_like(x), opt)
    assert set(losses) == {"token_ce", "dec_l1", "total"}
    assert np.isclose(losses["total"],
                      losses["token_ce"] + losses["dec_l1"], rtol=1e-6)
    changed = any(
        not np.array_equal(p.data, teacher_before[n])
        for n, p in state.student.params().items()
    )
    assert changed
    for n, p in state.teacher.params().items():
        assert np.array_equal(p.data, teacher_before[n])
    assert np.array_equal(state.student.codebook.vectors, cb_before)


def test_lambda_dec_zero_removes_decoder_term():
    state = _quick_state()
    state.lambda_dec = 0.0
    x = _specs(1)[0]
    opt = Adam(state.student.encoder_params(), lr=1e-3)
    losses = distill_step(state, x, np.zeros_like(x), opt)
    assert np.isclose(losses["total"], losses["token_ce"], rtol=1e-6)


def test_gaussian_baseline_is_seeded_and_bounded():
    state = _quick_state()
    x = _specs(1)[0]
    cfg = AttackConfig(eps=0.01)
    opt = Adam(state.student.encoder_params(), lr=0.0)
    rng = np.random.default_rng(5)
    losses = gaussian_baseline_step(state, x, cfg.eps / 2, opt, cfg, rng)
    assert np.isfinite(losses["total"])


def test_code_accuracy_bounds():
    model = make_tiny_model(seed=2)
    x = _specs(1)[0]
    pairs = [(x, x)]
    assert code_accuracy(model, model, pairs) == 1.0
    noisy = x + RNG.normal(0, 10.0, size=x.shape).astype(np.float32)
    acc = code_accuracy(model, model, [(x, noisy)])
    assert 0.0 <= acc < 1.0
    from vqspeech.errors import LengthMismatch

    with pytest.raises(LengthMismatch):
        code_accuracy(model, model, [(x, x[:, :3])])


def test_run_step2_both_modes_and_freezing():
    state = _quick_state()
    teacher_before = {n: p.data.copy() for n, p in state.teacher.params().items()}
    cb_before = state.student.codebook.vectors.copy()
    specs = _specs(3)
    cfg = AttackConfig(eps=0.02, steps=2)
    tc = TrainConfig(batch_size=1, crop_frames=12, max_steps=2, lr=1e-3, seed=0,
                     val_every=1)
    pairs = [(specs[0], specs[1])]
    student, log = run_step2(state, specs, cfg, tc, probe_pairs=pairs)
    assert len(log) == 2
    assert all("token_ce" in r and "dec_l1" in r for r in log)
    assert "code_acc" in log[-1]
    # teacher and codebook bitwise frozen
    for n, p in state.teacher.params().items():
        assert np.array_equal(p.data, teacher_before[n])
    assert np.array_equal(student.codebook.vectors, cb_before)

    g_state = _quick_state()
    _, g_log = run_step2(g_state, specs, cfg, tc, mode="gaussian")
    assert len(g_log) == 2
