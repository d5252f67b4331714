# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled conv1d kernels.

Same contract as ``_kernels_py``: input ``(B, T, C_in)``, kernel
``(K, C_in, C_out)``, zero padding of ``pad`` steps on both ends.
The padded im2col buffer is filled in C and contracted with a single BLAS
GEMM; everything after argument unpacking runs without the GIL.
"""
import numpy as np
cimport cython
from cython cimport floating
from libc.string cimport memcpy, memset
from scipy.linalg.cython_blas cimport dgemm, sgemm


cdef inline void _gemm(char ta, char tb, int m, int n, int k,
                       floating* a, int lda, floating* b, int ldb,
                       floating beta, floating* c, int ldc) noexcept nogil:
    # column-major BLAS: C = op(A) @ op(B) + beta*C
    cdef float one_f = 1.0, beta_f
    cdef double one_d = 1.0, beta_d
    if floating is float:
        beta_f = beta
        sgemm(&ta, &tb, &m, &n, &k, &one_f, a, &lda, b, &ldb, &beta_f, c, &ldc)
    else:
        beta_d = beta
        dgemm(&ta, &tb, &m, &n, &k, &one_d, a, &lda, b, &ldb, &beta_d, c, &ldc)


cdef void _im2col(floating* x, floating* col, Py_ssize_t B, Py_ssize_t T, Py_ssize_t C,
                  Py_ssize_t K, Py_ssize_t T_out, Py_ssize_t pad) noexcept nogil:
    cdef Py_ssize_t bi, t, k, ti
    cdef floating* row
    for bi in range(B):
        for t in range(T_out):
            row = col + (bi * T_out + t) * K * C
            for k in range(K):
                ti = t + k - pad
                if 0 <= ti < T:
                    memcpy(row + k * C, x + (bi * T + ti) * C, C * sizeof(floating))
                else:
                    memset(row + k * C, 0, C * sizeof(floating))


cdef void _col2im(floating* gcol, floating* gx, Py_ssize_t B, Py_ssize_t T, Py_ssize_t C,
                  Py_ssize_t K, Py_ssize_t T_out, Py_ssize_t pad) noexcept nogil:
    cdef Py_ssize_t bi, t, k, ti, c
    cdef floating* row
    cdef floating* dst
    for bi in range(B):
        for t in range(T_out):
            row = gcol + (bi * T_out + t) * K * C
            for k in range(K):
                ti = t + k - pad
                if 0 <= ti < T:
                    dst = gx + (bi * T + ti) * C
                    for c in range(C):
                        dst[c] += row[k * C + c]


def conv1d_forward(floating[:, :, ::1] x, floating[:, :, ::1] w,
                   floating[::1] b, Py_ssize_t pad):
    cdef Py_ssize_t B = x.shape[0], T = x.shape[1], C_in = x.shape[2]
    cdef Py_ssize_t K = w.shape[0], C_out = w.shape[2]
    cdef Py_ssize_t T_out = T + 2 * pad - K + 1
    cdef Py_ssize_t M = B * T_out, KC = K * C_in, r, o
    dtype = np.float32 if floating is float else np.float64
    out = np.empty((B, T_out, C_out), dtype=dtype)
    col = np.empty((M, KC), dtype=dtype)
    cdef floating[:, :, ::1] ov = out
    cdef floating[:, ::1] cv = col
    cdef floating* op = &ov[0, 0, 0]
    if M == 0:
        return out
    with nogil:
        _im2col(&x[0, 0, 0], &cv[0, 0], B, T, C_in, K, T_out, pad)
        for r in range(M):
            for o in range(C_out):
                op[r * C_out + o] = b[o]
        # out(M x C_out) += col(M x KC) @ w(KC x C_out), row-major
        _gemm(c'N', c'N', <int>C_out, <int>M, <int>KC, &w[0, 0, 0], <int>C_out,
              &cv[0, 0], <int>KC, 1.0, op, <int>C_out)
    return out


def conv1d_backward(floating[:, :, ::1] x, floating[:, :, ::1] w,
                    floating[:, :, ::1] gout, Py_ssize_t pad):
    cdef Py_ssize_t B = x.shape[0], T = x.shape[1], C_in = x.shape[2]
    cdef Py_ssize_t K = w.shape[0], C_out = w.shape[2], T_out = gout.shape[1]
    cdef Py_ssize_t M = B * T_out, KC = K * C_in, r, o
    dtype = np.float32 if floating is float else np.float64
    gx = np.zeros((B, T, C_in), dtype=dtype)
    gw = np.zeros((K, C_in, C_out), dtype=dtype)
    gb = np.zeros(C_out, dtype=dtype)
    col = np.empty((M, KC), dtype=dtype)
    gcol = np.empty((M, KC), dtype=dtype)
    cdef floating[:, :, ::1] gxv = gx
    cdef floating[:, :, ::1] gwv = gw
    cdef floating[::1] gbv = gb
    cdef floating[:, ::1] cv = col
    cdef floating[:, ::1] gcv = gcol
    cdef floating* gp = &gout[0, 0, 0]
    if M == 0:
        return gx, gw, gb
    with nogil:
        for r in range(M):
            for o in range(C_out):
                gbv[o] += gp[r * C_out + o]
        _im2col(&x[0, 0, 0], &cv[0, 0], B, T, C_in, K, T_out, pad)
        # gw(KC x C_out) = col^T @ gout
        _gemm(c'N', c'T', <int>C_out, <int>KC, <int>M, gp, <int>C_out,
              &cv[0, 0], <int>KC, 0.0, &gwv[0, 0, 0], <int>C_out)
        # gcol(M x KC) = gout @ w^T
        _gemm(c'T', c'N', <int>KC, <int>M, <int>C_out, &w[0, 0, 0], <int>C_out,
              gp, <int>C_out, 0.0, &gcv[0, 0], <int>KC)
        _col2im(&gcv[0, 0], &gxv[0, 0, 0], B, T, C_in, K, T_out, pad)
    return gx, gw, gb
