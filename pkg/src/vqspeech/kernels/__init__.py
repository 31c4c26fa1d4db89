"""Hot-kernel dispatch.

The compiled Cython backend is preferred when importable; the numpy backend
is the fallback. Set VQSPEECH_KERNELS=numpy or =compiled to force one.
Both expose: conv1d_forward, conv1d_grad_input, conv1d_grad_weight, l2_argmin.
"""

import os

import numpy as np

from . import _numpy_backend

try:
    from . import _core as _compiled_backend
except ImportError:
    _compiled_backend = None


def available_backends():
    names = ["numpy"]
    if _compiled_backend is not None:
        names.append("compiled")
    return names


def get_backend(name):
    if name == "numpy":
        return _numpy_backend
    if name == "compiled":
        if _compiled_backend is None:
            raise ImportError("compiled kernel extension is not built")
        return _compiled_backend
    raise ValueError(f"unknown kernel backend {name!r}")


def _select():
    forced = os.environ.get("VQSPEECH_KERNELS")
    if forced:
        return get_backend(forced)
    if _compiled_backend is not None:
        return _compiled_backend
    return _numpy_backend


_active = _select()

BACKEND = _active.NAME


def _contig(a, dtype=None):
    return np.ascontiguousarray(a, dtype=dtype)


def conv1d_forward(x, w, b):
    return _active.conv1d_forward(_contig(x), _contig(w), _contig(b))


def conv1d_grad_input(gout, w):
    return _active.conv1d_grad_input(_contig(gout), _contig(w))


def conv1d_grad_weight(x, gout, k):
    return _active.conv1d_grad_weight(_contig(x), _contig(gout), k)


def l2_argmin(queries, codes):
    q = _contig(queries)
    c = _contig(codes, dtype=q.dtype)
    return _active.l2_argmin(q, c)
