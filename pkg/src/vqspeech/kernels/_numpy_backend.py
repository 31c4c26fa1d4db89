"""Pure-numpy kernel implementations.

These delegate the inner loops to BLAS via tensordot/einsum and are the
fallback when the compiled extension is unavailable (and the reference the
extension is tested against).
"""

import numpy as np

NAME = "numpy"


def _pad_same(x, k):
    p = (k - 1) // 2
    return np.pad(x, ((0, 0), (p, p)))


def conv1d_forward(x, w, b):
    """Same-padded stride-1 cross-correlation.

    x: (C_in, T), w: (C_out, C_in, k), b: (C_out,) -> (C_out, T)
    """
    c_out, c_in, k = w.shape
    t = x.shape[1]
    xp = _pad_same(x, k)
    # windows: (T, C_in, k)
    win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=1)
    win = win.transpose(1, 0, 2)
    out = np.tensordot(w, win, axes=([1, 2], [1, 2])) + b[:, None]
    return np.ascontiguousarray(out[:, :t])


def conv1d_grad_input(gout, w):
    """Gradient of conv1d_forward w.r.t. x.  gout: (C_out, T) -> (C_in, T)."""
    c_out, c_in, k = w.shape
    t = gout.shape[1]
    gp = _pad_same(gout, k)
    win = np.lib.stride_tricks.sliding_window_view(gp, k, axis=1)
    win = win.transpose(1, 0, 2)  # (T, C_out, k)
    wflip = w[:, :, ::-1]
    gx = np.tensordot(wflip.transpose(1, 0, 2), win, axes=([1, 2], [1, 2]))
    return np.ascontiguousarray(gx[:, :t])


def conv1d_grad_weight(x, gout, k):
    """Gradient w.r.t. weights.  x: (C_in, T), gout: (C_out, T) -> (C_out, C_in, k)."""
    xp = _pad_same(x, k)
    win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=1)  # (C_in, T, k)
    return np.einsum("ot,itk->oik", gout, win, optimize=True)


def l2_argmin(queries, codes):
    """Index of the nearest code (squared L2) per query row, ties to lowest index.

    queries: (N, d), codes: (V, d) -> int64 (N,)
    """
    q = queries.astype(np.float64, copy=False)
    c = codes.astype(np.float64, copy=False)
    d2 = (
        np.sum(q * q, axis=1, keepdims=True)
        - 2.0 * (q @ c.T)
        + np.sum(c * c, axis=1)[None, :]
    )
    return np.argmin(d2, axis=1).astype(np.int64)
