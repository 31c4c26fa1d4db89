# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels.

The convolutions lower to an im2col buffer built in C plus one BLAS GEMM
call (sgemm/dgemm via scipy's Fortran bindings); the codebook scan is a
direct first-minimum loop so tie-breaking is exactly lowest-index."""

import numpy as np

cimport cython
cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm, sgemm

ctypedef fused real:
    float
    double

NAME = "compiled"


cdef void _gemm_rowmajor(bint trans_a, bint trans_b,
                         int m, int n, int k, real alpha,
                         real* a, int a_cols, real* b, int b_cols,
                         real beta, real* c) noexcept nogil:
    """Row-major C(m x n) = alpha * op(A) op(B) + beta * C via Fortran GEMM
    on the transposed problem."""
    cdef char ta = b'T' if trans_b else b'N'
    cdef char tb = b'T' if trans_a else b'N'
    cdef int lda = b_cols
    cdef int ldb = a_cols
    cdef int ldc = n
    if real is float:
        sgemm(&ta, &tb, &n, &m, &k, <float*>&alpha,
              <float*>b, &lda, <float*>a, &ldb,
              <float*>&beta, <float*>c, &ldc)
    else:
        dgemm(&ta, &tb, &n, &m, &k, <double*>&alpha,
              <double*>b, &lda, <double*>a, &ldb,
              <double*>&beta, <double*>c, &ldc)


cdef void _im2col(real[:, ::1] x, real[:, ::1] col, Py_ssize_t k) noexcept nogil:
    cdef Py_ssize_t c_in = x.shape[0]
    cdef Py_ssize_t t_len = x.shape[1]
    cdef Py_ssize_t pad = (k - 1) // 2
    cdef Py_ssize_t ci, j, t, lo, hi
    for ci in range(c_in):
        for j in range(k):
            lo = pad - j
            if lo < 0:
                lo = 0
            hi = t_len + pad - j
            if hi > t_len:
                hi = t_len
            for t in range(lo):
                col[ci * k + j, t] = 0
            for t in range(lo, hi):
                col[ci * k + j, t] = x[ci, t + j - pad]
            for t in range(hi, t_len):
                col[ci * k + j, t] = 0


def _empty(Py_ssize_t rows, Py_ssize_t cols, bint is_float):
    return np.empty((rows, cols), dtype=np.float32 if is_float else np.float64)


def conv1d_forward(real[:, ::1] x, real[:, :, ::1] w, real[::1] b):
    """Same-padded stride-1 cross-correlation; x: (C_in, T), w: (C_out, C_in, k)."""
    cdef Py_ssize_t c_out = w.shape[0]
    cdef Py_ssize_t c_in = w.shape[1]
    cdef Py_ssize_t k = w.shape[2]
    cdef Py_ssize_t t_len = x.shape[1]
    cdef bint is_f = (real is float)

    col_np = _empty(c_in * k, t_len, is_f)
    out_np = _empty(c_out, t_len, is_f)
    cdef real[:, ::1] col = col_np
    cdef real[:, ::1] out = out_np
    cdef Py_ssize_t co, t

    with nogil:
        _im2col(x, col, k)
        _gemm_rowmajor(False, False, <int>c_out, <int>t_len, <int>(c_in * k),
                       <real>1.0, &w[0, 0, 0], <int>(c_in * k),
                       &col[0, 0], <int>t_len, <real>0.0, &out[0, 0])
        for co in range(c_out):
            for t in range(t_len):
                out[co, t] += b[co]
    return out_np


def conv1d_grad_input(real[:, ::1] gout, real[:, :, ::1] w):
    """Gradient w.r.t. the conv input; gout: (C_out, T) -> (C_in, T)."""
    cdef Py_ssize_t c_out = w.shape[0]
    cdef Py_ssize_t c_in = w.shape[1]
    cdef Py_ssize_t k = w.shape[2]
    cdef Py_ssize_t t_len = gout.shape[1]
    cdef Py_ssize_t pad = (k - 1) // 2
    cdef bint is_f = (real is float)

    colg_np = _empty(c_in * k, t_len, is_f)
    gx_np = np.zeros((c_in, t_len), dtype=np.float32 if is_f else np.float64)
    cdef real[:, ::1] colg = colg_np
    cdef real[:, ::1] gx = gx_np
    cdef Py_ssize_t ci, j, t, lo, hi

    with nogil:
        # colgrad (C_in*k, T) = W^T (C_in*k, C_out) @ gout (C_out, T)
        _gemm_rowmajor(True, False, <int>(c_in * k), <int>t_len, <int>c_out,
                       <real>1.0, &w[0, 0, 0], <int>(c_in * k),
                       &gout[0, 0], <int>t_len, <real>0.0, &colg[0, 0])
        # col2im accumulate
        for ci in range(c_in):
            for j in range(k):
                lo = pad - j
                if lo < 0:
                    lo = 0
                hi = t_len + pad - j
                if hi > t_len:
                    hi = t_len
                for t in range(lo, hi):
                    gx[ci, t + j - pad] += colg[ci * k + j, t]
    return gx_np


def conv1d_grad_weight(real[:, ::1] x, real[:, ::1] gout, Py_ssize_t k):
    """Gradient w.r.t. the conv weights -> (C_out, C_in, k)."""
    cdef Py_ssize_t c_in = x.shape[0]
    cdef Py_ssize_t c_out = gout.shape[0]
    cdef Py_ssize_t t_len = x.shape[1]
    cdef bint is_f = (real is float)

    col_np = _empty(c_in * k, t_len, is_f)
    gw_np = np.empty((c_out, c_in, k), dtype=np.float32 if is_f else np.float64)
    cdef real[:, ::1] col = col_np
    cdef real[:, :, ::1] gw = gw_np

    with nogil:
        _im2col(x, col, k)
        # gW (C_out, C_in*k) = gout (C_out, T) @ col^T (T, C_in*k)
        _gemm_rowmajor(False, True, <int>c_out, <int>(c_in * k), <int>t_len,
                       <real>1.0, &gout[0, 0], <int>t_len,
                       &col[0, 0], <int>t_len, <real>0.0, &gw[0, 0, 0])
    return gw_np


def l2_argmin(real[:, ::1] queries, real[:, ::1] codes):
    """Nearest code row (squared L2) per query; ties break to lowest index."""
    cdef Py_ssize_t n = queries.shape[0]
    cdef Py_ssize_t v = codes.shape[0]
    cdef Py_ssize_t d = queries.shape[1]
    cdef Py_ssize_t i, j, p
    cdef double best, dist, diff
    cdef Py_ssize_t best_j

    out_np = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_np

    with nogil:
        for i in range(n):
            best = -1
            best_j = 0
            for j in range(v):
                dist = 0
                for p in range(d):
                    diff = queries[i, p] - codes[j, p]
                    dist += diff * diff
                if best < 0 or dist < best:
                    best = dist
                    best_j = j
            out[i] = best_j
    return out_np
