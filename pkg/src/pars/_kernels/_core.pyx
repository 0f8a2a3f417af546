# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled MLP kernels.

Matrix products go through BLAS (via scipy's Cython bindings); bias add,
ReLU, ReLU masking, bias-gradient reduction and softmax are fused C loops,
which removes the Python dispatch overhead the NumPy fallback pays per
operation. Semantics match pars._kernels._numpy exactly.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

NAME = "compiled"


cdef inline void _x_wt(double[:, ::1] x, double[:, ::1] w, double[:, ::1] out) noexcept:
    """out (n,o) = x (n,d) @ w (o,d)^T."""
    cdef int n = <int> x.shape[0]
    cdef int d = <int> x.shape[1]
    cdef int o = <int> w.shape[0]
    cdef double one = 1.0, zero = 0.0
    cdef char ct = c'T', cn = c'N'
    if n == 0 or d == 0 or o == 0:
        return
    # Row-major buffers seen column-major: out^T (o,n) = (w^T)^T @ x^T.
    dgemm(&ct, &cn, &o, &n, &d, &one, &w[0, 0], &d, &x[0, 0], &d, &zero, &out[0, 0], &o)


cdef inline void _bt_a(double[:, ::1] a, double[:, ::1] b, double[:, ::1] out) noexcept:
    """out (o,d) = b (n,o)^T @ a (n,d)."""
    cdef int n = <int> a.shape[0]
    cdef int d = <int> a.shape[1]
    cdef int o = <int> b.shape[1]
    cdef double one = 1.0, zero = 0.0
    cdef char ct = c'T', cn = c'N'
    if d == 0 or o == 0:
        return
    if n == 0:
        out[:, :] = 0.0
        return
    # Row-major out (o,d) is col-major out^T (d,o) = a^T (d,n) @ b (n,o);
    # the a/b buffers seen column-major are a^T (lda=d) and b^T (ldb=o).
    dgemm(&cn, &ct, &d, &o, &n, &one, &a[0, 0], &d, &b[0, 0], &o, &zero, &out[0, 0], &d)


cdef inline void _a_b(double[:, ::1] a, double[:, ::1] b, double[:, ::1] out) noexcept:
    """out (n,d) = a (n,o) @ b (o,d)."""
    cdef int n = <int> a.shape[0]
    cdef int o = <int> a.shape[1]
    cdef int d = <int> b.shape[1]
    cdef double one = 1.0, zero = 0.0
    cdef char cn = c'N'
    if n == 0 or o == 0 or d == 0:
        return
    # out^T (d,n) = b^T (d,o) @ a^T (o,n), all buffers seen column-major.
    dgemm(&cn, &cn, &d, &n, &o, &one, &b[0, 0], &d, &a[0, 0], &o, &zero, &out[0, 0], &d)


def softmax_batch(object logits_obj):
    cdef double[:, ::1] logits = np.ascontiguousarray(logits_obj, dtype=np.float64)
    cdef Py_ssize_t n = logits.shape[0]
    cdef Py_ssize_t k = logits.shape[1]
    out_arr = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double m, s, v
    for i in range(n):
        m = logits[i, 0]
        for j in range(1, k):
            if logits[i, j] > m:
                m = logits[i, j]
        s = 0.0
        for j in range(k):
            v = exp(logits[i, j] - m)
            out[i, j] = v
            s += v
        for j in range(k):
            out[i, j] /= s
    return out_arr


def forward_batch(object x_obj, list weights, list biases):
    cdef double[:, ::1] a = x_obj
    cdef Py_ssize_t n_layers = len(weights)
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, r, c, o
    cdef double[:, ::1] w, z, nxt
    cdef double[::1] b
    cdef double v
    acts = [x_obj]
    pres = []
    for i in range(n_layers):
        w = weights[i]
        b = biases[i]
        o = w.shape[0]
        zarr = np.empty((n, o), dtype=np.float64)
        z = zarr
        _x_wt(a, w, z)
        if i < n_layers - 1:
            aarr = np.empty((n, o), dtype=np.float64)
            nxt = aarr
            for r in range(n):
                for c in range(o):
                    v = z[r, c] + b[c]
                    z[r, c] = v
                    nxt[r, c] = v if v > 0.0 else 0.0
            a = nxt
            acts.append(aarr)
        else:
            for r in range(n):
                for c in range(o):
                    z[r, c] += b[c]
        pres.append(zarr)
    return pres[n_layers - 1], (acts, pres)


def backward_batch(object dlogits_obj, list weights, tuple cache):
    acts, pres = cache
    cdef Py_ssize_t n_layers = len(weights)
    cdef double[:, ::1] dz = dlogits_obj
    cdef double[:, ::1] w, act, pre, dwv, da
    cdef double[::1] dbv
    cdef Py_ssize_t n = dz.shape[0]
    cdef Py_ssize_t i, r, c, o, d
    dws = [None] * n_layers
    dbs = [None] * n_layers
    for i in range(n_layers - 1, -1, -1):
        w = weights[i]
        act = acts[i]
        o = w.shape[0]
        d = w.shape[1]
        dwarr = np.empty((o, d), dtype=np.float64)
        dwv = dwarr
        _bt_a(act, dz, dwv)
        dbarr = np.zeros(o, dtype=np.float64)
        dbv = dbarr
        for r in range(n):
            for c in range(o):
                dbv[c] += dz[r, c]
        dws[i] = dwarr
        dbs[i] = dbarr
        if i > 0:
            pre = pres[i - 1]
            daarr = np.empty((n, d), dtype=np.float64)
            da = daarr
            _a_b(dz, w, da)
            for r in range(n):
                for c in range(d):
                    if pre[r, c] <= 0.0:
                        da[r, c] = 0.0
            dz = da
    return dws, dbs
