"""Self-distillation with adversarial training: a frozen teacher supervises a
student whose encoder is attacked by sign-gradient PGD on its token
predictions, with an L1 decoder-robustness term."""

import json
from dataclasses import dataclass

import numpy as np

from .errors import EmptyCorpus, IndexOutOfRange, LengthMismatch
from .model import VqVaeModel
from .nn.optim import Adam
from .nn.tensor import Tensor, logsumexp
from .vq import quantize_batch, straight_through

TOKEN_DIST_EPS = 1e-12


@dataclass(frozen=True)
class AttackConfig:
    eps: float
    steps: int = 3
    alpha: float = None  # defaults to eps / 2

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("attack needs at least one step")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.alpha is None:
            object.__setattr__(self, "alpha", self.eps / 2.0)
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")


def default_epsilon(spectrograms, rel=0.01):
    """Budget as a fraction of the corpus mean of max |X|."""
    peaks = [float(np.max(np.abs(x))) for x in spectrograms]
    return rel * float(np.mean(peaks))


@dataclass
class DistillState:
    teacher: VqVaeModel
    student: VqVaeModel
    lambda_dec: float = 1.0


def _clone_model(model):
    clone = VqVaeModel(model.config, seed=0)
    src, dst = model.params(), clone.params()
    for name, p in dst.items():
        p.data[...] = src[name].data
    clone.codebook = model.codebook.copy()
    return clone


def make_distill_state(teacher, lambda_dec=1.0):
    """Student initialized from the teacher's weights; codebook shared fixed."""
    return DistillState(teacher=teacher, student=_clone_model(teacher),
                        lambda_dec=lambda_dec)


def token_ce_loss(embeddings, target_indices, codebook):
    """Cross-entropy of the distance-softmax token distribution.

    embeddings: Tensor (d, T); logits per frame are the negated unsquared L2
    distances to every codeword. Gradient reaches the embeddings only; the
    codebook is a constant.
    """
    target = np.asarray(target_indices, dtype=np.int64)
    if target.size and (target.min() < 0 or target.max() >= codebook.size):
        raise IndexOutOfRange("target token outside codebook")
    e = embeddings.T  # (T, d)
    c = Tensor(codebook.vectors.astype(embeddings.dtype))
    e2 = (e * e).sum(axis=1, keepdims=True)
    c2 = Tensor((codebook.vectors.astype(np.float64) ** 2).sum(axis=1)
                .astype(embeddings.dtype))
    d2 = e2 - (e @ c.T) * 2.0 + c2
    dist = (d2 + TOKEN_DIST_EPS).sqrt()
    logits = -dist  # (T, V)
    lse = logsumexp(logits, axis=-1).reshape(-1)
    picked = logits.take_per_row(target)
    return (lse - picked).mean()


def teacher_tokens(teacher, x):
    """Teacher tokens for clean input, selected by plain L2 distance."""
    z = teacher.encode(np.asarray(x, dtype=np.float32)).data
    idx, _, _ = quantize_batch(z.T, teacher.codebook, "l2")
    return idx


def attack(state, x, cfg, target_idx=None):
    """Sign-gradient PGD under an L-inf budget on the spectrogram.

    Returns delta with max |delta| <= cfg.eps.
    """
    x = np.asarray(x, dtype=np.float32)
    if target_idx is None:
        target_idx = teacher_tokens(state.teacher, x)
    delta = np.zeros_like(x)
    for _ in range(cfg.steps):
        leaf = Tensor(x + delta, requires_grad=True)
        loss = token_ce_loss(state.student.encode(leaf), target_idx,
                             state.student.codebook)
        loss.backward()
        delta = delta + cfg.alpha * np.sign(leaf.grad)
        delta = np.clip(delta, -cfg.eps, cfg.eps).astype(np.float32)
    return delta


def distill_step(state, x, delta, optimizer, target_idx=None):
    """One student update on the attacked input.

    total = token CE against the teacher's clean tokens
          + lambda_dec * L1(clean input, student decode of attacked tokens).
    The codebook is untouched.
    """
    x = np.asarray(x, dtype=np.float32)
    if target_idx is None:
        target_idx = teacher_tokens(state.teacher, x)
    xa = Tensor(x + np.asarray(delta, dtype=np.float32))
    z_s = state.student.encode(xa)
    ce = token_ce_loss(z_s, target_idx, state.student.codebook)
    _, words, _ = quantize_batch(z_s.data.T, state.student.codebook, "l2")
    st = straight_through(z_s, words.T.astype(z_s.dtype))
    x_hat = state.student.decode(st)
    dec_l1 = (Tensor(x) - x_hat).abs().mean()
    total = ce + dec_l1 * state.lambda_dec
    optimizer.zero_grad()
    total.backward()
    optimizer.step()
    return {"token_ce": float(ce.data), "dec_l1": float(dec_l1.data),
            "total": float(total.data)}


def gaussian_baseline_step(state, x, sigma, optimizer, cfg, rng):
    """Control: seeded Gaussian perturbation clipped to the attack budget."""
    delta = rng.normal(0.0, sigma, size=np.shape(x))
    delta = np.clip(delta, -cfg.eps, cfg.eps).astype(np.float32)
    return distill_step(state, x, delta, optimizer)


def code_accuracy(student, teacher, clean_noisy_pairs):
    """Fraction of frames where the student's token on the noisy input equals
    the teacher's token on the paired clean input."""
    hits = total = 0
    for clean, noisy in clean_noisy_pairs:
        clean = np.asarray(clean, dtype=np.float32)
        noisy = np.asarray(noisy, dtype=np.float32)
        if clean.shape != noisy.shape:
            raise LengthMismatch(f"{clean.shape} vs {noisy.shape}")
        t_idx = teacher_tokens(teacher, clean)
        z = student.encode(noisy).data
        s_idx, _, _ = quantize_batch(z.T, student.codebook, "l2")
        hits += int(np.count_nonzero(t_idx == s_idx))
        total += t_idx.size
    return hits / total if total else 0.0


def run_step2(state, spectrograms, attack_cfg, train_cfg, probe_pairs=None,
              log_path=None, mode="adversarial"):
    """Alternate attack and distillation over the corpus.

    mode="gaussian" swaps the attack for the Gaussian-perturbation control
    with sigma = eps / 2. Returns (student, log_rows).
    """
    if not spectrograms:
        raise EmptyCorpus("no distillation spectrograms")
    tc = train_cfg
    rng = np.random.default_rng(tc.seed)
    opt = Adam(
        {**state.student.encoder_params(), **state.student.decoder_params()},
        lr=tc.lr,
    )
    log_rows = []
    log_file = open(log_path, "w") if log_path else None
    try:
        for step in range(1, tc.max_steps + 1):
            idx = rng.integers(0, len(spectrograms), size=tc.batch_size)
            ce_sum = l1_sum = 0.0
            for i in idx:
                spec = spectrograms[i]
                t = spec.shape[1]
                w = min(tc.crop_frames, t)
                start = int(rng.integers(0, t - w + 1))
                x = spec[:, start : start + w]
                target = teacher_tokens(state.teacher, x)
                if mode == "adversarial":
                    delta = attack(state, x, attack_cfg, target_idx=target)
                    losses = distill_step(state, x, delta, opt, target_idx=target)
                else:
                    losses = gaussian_baseline_step(
                        state, x, attack_cfg.eps / 2.0, opt, attack_cfg, rng
                    )
                ce_sum += losses["token_ce"]
                l1_sum += losses["dec_l1"]
            row = {
                "step": step,
                "token_ce": ce_sum / tc.batch_size,
                "dec_l1": l1_sum / tc.batch_size,
            }
            if probe_pairs and tc.val_every and step % tc.val_every == 0:
                row["code_acc"] = code_accuracy(
                    state.student, state.teacher, probe_pairs
                )
            log_rows.append(row)
            if log_file:
                log_file.write(json.dumps(row) + "\n")
    finally:
        if log_file:
            log_file.close()
    return state.student, log_rows
