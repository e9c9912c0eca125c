# cython: language_level=3
"""Compiled hot kernels. Same contracts as ``_reference``.

Short reductions use a fixed four-way accumulation order; wide convolutions go
through one BLAS dgemm per kernel tap, which packs operands and so does not
depend on input alignment.
"""
import numpy as np

from scipy.linalg.cython_blas cimport dgemm


cdef inline double _dot(const double* a, const double* b, Py_ssize_t n) noexcept nogil:
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef Py_ssize_t i = 0
    while i + 4 <= n:
        s0 += a[i] * b[i]
        s1 += a[i + 1] * b[i + 1]
        s2 += a[i + 2] * b[i + 2]
        s3 += a[i + 3] * b[i + 3]
        i += 4
    while i < n:
        s0 += a[i] * b[i]
        i += 1
    return (s0 + s1) + (s2 + s3)


cdef inline void _axpy(double alpha, const double* x, double* y, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        y[i] += alpha * x[i]


# Below this many multiply-adds per output the direct loop beats a BLAS call.
cdef Py_ssize_t SMALL_SPAN = 64


cdef inline void _gemm(char* ta, char* tb, int m, int n, int k, const double* a, int lda,
                       const double* b, int ldb, double* c, int ldc) noexcept nogil:
    cdef double one = 1.0
    dgemm(ta, tb, &m, &n, &k, &one, <double*>a, &lda, <double*>b, &ldb, &one, c, &ldc)


def conv1d_forward(const double[:, :, ::1] x, const double[:, :, ::1] w, const double[::1] b):
    cdef Py_ssize_t n = x.shape[0], t_in = x.shape[1], c = x.shape[2]
    cdef Py_ssize_t nf = w.shape[0], k = w.shape[1]
    cdef Py_ssize_t t_out = t_in - k + 1, span = k * c
    cdef Py_ssize_t i, t, f, j
    out_arr = np.empty((n, t_out, nf))
    cdef double[:, :, ::1] out = out_arr
    with nogil:
        if span <= SMALL_SPAN:
            for i in range(n):
                for t in range(t_out):
                    for f in range(nf):
                        out[i, t, f] = b[f] + _dot(&x[i, t, 0], &w[f, 0, 0], span)
        else:
            # out[i] (t_out x nf) += x[i, j:j+t_out] (t_out x c) @ w[:, j, :].T, per tap j
            for i in range(n):
                for t in range(t_out):
                    for f in range(nf):
                        out[i, t, f] = b[f]
                for j in range(k):
                    _gemm(b"T", b"N", <int>nf, <int>t_out, <int>c, &w[0, j, 0], <int>span,
                          &x[i, j, 0], <int>c, &out[i, 0, 0], <int>nf)
    return out_arr


def conv1d_backward(const double[:, :, ::1] x, const double[:, :, ::1] w,
                    const double[:, :, ::1] g):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[2]
    cdef Py_ssize_t nf = w.shape[0], k = w.shape[1]
    cdef Py_ssize_t t_out = g.shape[1], span = k * c
    cdef Py_ssize_t i, t, f, j
    cdef double gv
    dx_arr = np.zeros((x.shape[0], x.shape[1], c))
    dw_arr = np.zeros((nf, k, c))
    db_arr = np.zeros(nf)
    cdef double[:, :, ::1] dx = dx_arr
    cdef double[:, :, ::1] dw = dw_arr
    cdef double[::1] db = db_arr
    with nogil:
        for i in range(n):
            for t in range(t_out):
                for f in range(nf):
                    db[f] += g[i, t, f]
        if span <= SMALL_SPAN:
            for i in range(n):
                for t in range(t_out):
                    for f in range(nf):
                        gv = g[i, t, f]
                        if gv == 0.0:
                            continue
                        _axpy(gv, &x[i, t, 0], &dw[f, 0, 0], span)
                        _axpy(gv, &w[f, 0, 0], &dx[i, t, 0], span)
        else:
            for i in range(n):
                for j in range(k):
                    # dw[:, j, :] += g[i].T @ x[i, j:j+t_out]
                    _gemm(b"N", b"T", <int>c, <int>nf, <int>t_out, &x[i, j, 0], <int>c,
                          &g[i, 0, 0], <int>nf, &dw[0, j, 0], <int>span)
                    # dx[i, j:j+t_out] += g[i] @ w[:, j, :]
                    _gemm(b"N", b"N", <int>c, <int>t_out, <int>nf, &w[0, j, 0], <int>span,
                          &g[i, 0, 0], <int>nf, &dx[i, j, 0], <int>c)
    return dx_arr, dw_arr, db_arr


def maxpool_forward(const double[:, :, ::1] x, Py_ssize_t pool):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[2]
    cdef Py_ssize_t t_out = x.shape[1] // pool
    cdef Py_ssize_t i, t, ch, p, best
    cdef double v
    out_arr = np.empty((n, t_out, c))
    idx_arr = np.empty((n, t_out, c), dtype=np.int64)
    cdef double[:, :, ::1] out = out_arr
    cdef long long[:, :, ::1] idx = idx_arr
    with nogil:
        for i in range(n):
            for t in range(t_out):
                for ch in range(c):
                    best = 0
                    v = x[i, t * pool, ch]
                    for p in range(1, pool):
                        if x[i, t * pool + p, ch] > v:
                            v = x[i, t * pool + p, ch]
                            best = p
                    out[i, t, ch] = v
                    idx[i, t, ch] = best
    return out_arr, idx_arr


def maxpool_backward(const double[:, :, ::1] g, const long long[:, :, ::1] idx,
                     Py_ssize_t pool, Py_ssize_t t_in):
    cdef Py_ssize_t n = g.shape[0], t_out = g.shape[1], c = g.shape[2]
    cdef Py_ssize_t i, t, ch
    dx_arr = np.zeros((n, t_in, c))
    cdef double[:, :, ::1] dx = dx_arr
    with nogil:
        for i in range(n):
            for t in range(t_out):
                for ch in range(c):
                    dx[i, t * pool + idx[i, t, ch], ch] = g[i, t, ch]
    return dx_arr


def kendall_counts(const double[::1] x, const double[::1] y):
    """Concordant, discordant, x-tied and y-tied pair counts over i < j."""
    cdef Py_ssize_t n = x.shape[0], i, j
    cdef long long conc = 0, disc = 0, tx = 0, ty = 0
    cdef double dx, dy
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                dx = x[i] - x[j]
                dy = y[i] - y[j]
                if dx == 0.0:
                    tx += 1
                if dy == 0.0:
                    ty += 1
                if dx * dy > 0.0:
                    conc += 1
                elif dx * dy < 0.0:
                    disc += 1
    return int(conc), int(disc), int(tx), int(ty)
