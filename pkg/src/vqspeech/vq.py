"""Vector quantizer: codebook storage, k-means init, nearest-neighbor
selection under L2 and cosine criteria, EMA updates, straight-through."""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import IndexOutOfRange, ShapeMismatch, TooFewSamples
from .nn.tensor import Tensor

DEFAULT_DECAY = 0.99
DEFAULT_LAPLACE_EPS = 1e-5
_COS_NORM_EPS = 1e-12


@dataclass
class Codebook:
    vectors: np.ndarray  # (V, d)
    ema_counts: np.ndarray  # (V,)
    ema_sums: np.ndarray  # (V, d)
    decay: float = DEFAULT_DECAY
    laplace_eps: float = DEFAULT_LAPLACE_EPS
    initialized: bool = True

    @classmethod
    def empty(cls, v, d, decay=DEFAULT_DECAY, laplace_eps=DEFAULT_LAPLACE_EPS,
              dtype=np.float32):
        return cls(
            vectors=np.zeros((v, d), dtype=dtype),
            ema_counts=np.zeros(v, dtype=dtype),
            ema_sums=np.zeros((v, d), dtype=dtype),
            decay=decay,
            laplace_eps=laplace_eps,
            initialized=False,
        )

    @property
    def size(self):
        return self.vectors.shape[0]

    @property
    def dim(self):
        return self.vectors.shape[1]

    def copy(self):
        return Codebook(
            self.vectors.copy(), self.ema_counts.copy(), self.ema_sums.copy(),
            self.decay, self.laplace_eps, self.initialized,
        )


def kmeans_init(embeddings, v, iters=10, seed=0, decay=DEFAULT_DECAY,
                laplace_eps=DEFAULT_LAPLACE_EPS):
    """Lloyd's algorithm with k-means++ style seeding on one batch of frames.

    embeddings: (N, d) with N >= V. EMA buffers start from the final cluster
    sizes and sums so the first ema_update continues smoothly.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    n, d = x.shape
    if n < v:
        raise TooFewSamples(f"{n} samples for {v} centroids")
    rng = np.random.default_rng(seed)

    centroids = np.empty((v, d))
    centroids[0] = x[rng.integers(n)]
    d2 = np.sum((x - centroids[0]) ** 2, axis=1)
    for i in range(1, v):
        total = d2.sum()
        if total <= 0:
            centroids[i] = x[rng.integers(n)]
        else:
            centroids[i] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((x - centroids[i]) ** 2, axis=1))

    assign = kernels.l2_argmin(x, centroids)
    for _ in range(iters):
        for j in range(v):
            members = x[assign == j]
            if members.size:
                centroids[j] = members.mean(axis=0)
        new_assign = kernels.l2_argmin(x, centroids)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign

    counts = np.bincount(assign, minlength=v).astype(np.float64)
    sums = np.zeros((v, d))
    np.add.at(sums, assign, x)
    dtype = np.asarray(embeddings).dtype
    if dtype not in (np.float32, np.float64):
        dtype = np.float32
    return Codebook(
        vectors=centroids.astype(dtype),
        ema_counts=counts.astype(dtype),
        ema_sums=sums.astype(dtype),
        decay=decay,
        laplace_eps=laplace_eps,
        initialized=True,
    )


def quantize_l2(z, codebook):
    """Nearest codeword by L2 distance; ties to lowest index."""
    idx = int(kernels.l2_argmin(np.asarray(z)[None, :], codebook.vectors)[0])
    return idx, codebook.vectors[idx]


def quantize_cos(z, codebook):
    """Nearest codeword after unit-normalizing query and codebook.

    Returns (index, codeword, degenerate) where degenerate flags a zero-norm
    query (mapped to index 0).
    """
    z = np.asarray(z, dtype=np.float64)
    nz = np.linalg.norm(z)
    if nz <= 0:
        return 0, codebook.vectors[0], True
    cn = _unit_rows(codebook.vectors)
    idx = int(kernels.l2_argmin((z / nz)[None, :], cn)[0])
    return idx, codebook.vectors[idx], False


def _unit_rows(m):
    m = np.asarray(m, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    return m / np.maximum(norms, _COS_NORM_EPS)


def quantize_batch(z_frames, codebook, metric):
    """Vectorized per-frame quantization.

    z_frames: (T, d). Returns (indices (T,), codewords (T, d), degenerate_mask).
    """
    z = np.asarray(z_frames, dtype=np.float64)
    degenerate = np.zeros(z.shape[0], dtype=bool)
    if metric == "l2":
        idx = kernels.l2_argmin(z, codebook.vectors)
    elif metric == "cos":
        norms = np.linalg.norm(z, axis=1)
        degenerate = norms <= 0
        zn = z / np.maximum(norms, _COS_NORM_EPS)[:, None]
        idx = kernels.l2_argmin(zn, _unit_rows(codebook.vectors))
        idx[degenerate] = 0
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return idx, codebook.vectors[idx], degenerate


def ema_update(codebook, assignments, embeddings):
    """EMA re-estimation of the codebook from one batch of assignments.

    Laplace-smoothed count denominator keeps rarely used codes finite.
    """
    z = np.asarray(embeddings, dtype=np.float64)
    a = np.asarray(assignments, dtype=np.int64)
    v = codebook.size
    if a.size and (a.min() < 0 or a.max() >= v):
        raise IndexOutOfRange("assignment index outside codebook")
    if z.shape[0] != a.size or z.shape[1] != codebook.dim:
        raise ShapeMismatch("embeddings/assignments shape mismatch")

    g = codebook.decay
    n_v = np.bincount(a, minlength=v).astype(np.float64)
    s_v = np.zeros((v, codebook.dim))
    np.add.at(s_v, a, z)

    counts = g * codebook.ema_counts.astype(np.float64) + (1 - g) * n_v
    sums = g * codebook.ema_sums.astype(np.float64) + (1 - g) * s_v
    total = counts.sum()
    smoothed = (counts + codebook.laplace_eps) / (total + v * codebook.laplace_eps) * total
    dtype = codebook.vectors.dtype
    codebook.ema_counts = counts.astype(dtype)
    codebook.ema_sums = sums.astype(dtype)
    codebook.vectors = (sums / smoothed[:, None]).astype(dtype)


def straight_through(z, z_q):
    """Forward value z_q, gradient routed unchanged to z.

    z is a Tensor; z_q may be a Tensor or array (treated as constant).
    """
    if not isinstance(z_q, Tensor):
        z_q = Tensor(np.asarray(z_q, dtype=z.dtype))
    if z.shape != z_q.shape:
        raise ShapeMismatch(f"{z.shape} vs {z_q.shape}")
    return z + (z_q.detach() - z.detach())


def commitment_loss(z, z_q, beta):
    """beta * mean over frames of squared L2 distance; gradient to z only.

    z: Tensor (d, T); z_q: constant (d, T).
    """
    if not isinstance(z_q, Tensor):
        z_q = Tensor(np.asarray(z_q, dtype=z.dtype))
    if z.shape != z_q.shape:
        raise ShapeMismatch(f"{z.shape} vs {z_q.shape}")
    diff = z - z_q.detach()
    return (diff * diff).sum(axis=0).mean() * beta


def codebook_usage(assignments, v):
    """Fraction of codes used and perplexity of the index distribution."""
    a = np.asarray(assignments, dtype=np.int64)
    if a.size == 0:
        return {"used_fraction": 0.0, "perplexity": 0.0}
    counts = np.bincount(a, minlength=v).astype(np.float64)
    p = counts / counts.sum()
    nz = p[p > 0]
    entropy = -np.sum(nz * np.log(nz))
    return {
        "used_fraction": float(np.count_nonzero(counts)) / v,
        "perplexity": float(np.exp(entropy)),
    }
