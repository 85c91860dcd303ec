# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled stencil and prox kernels.

Single-pass versions of the operators in ``_ops_py``; these run inside the
conjugate-gradient loops of the ADMM solvers, where the numpy versions pay
for several temporary arrays per call.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def grad2(x):
    """Periodic forward differences: returns (gx, gy)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] xa = \
        np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t h = xa.shape[0], w = xa.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] gx = np.empty((h, w))
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] gy = np.empty((h, w))
    cdef Py_ssize_t i, j, ip
    with nogil:
        for i in range(h):
            ip = i + 1 if i + 1 < h else 0
            for j in range(w - 1):
                gx[i, j] = xa[i, j + 1] - xa[i, j]
            gx[i, w - 1] = xa[i, 0] - xa[i, w - 1]
            for j in range(w):
                gy[i, j] = xa[ip, j] - xa[i, j]
    return gx, gy


def div2(gx, gy):
    """Adjoint of grad2: <grad2(x), (gx, gy)> == <x, div2(gx, gy)>."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] gxa = \
        np.ascontiguousarray(gx, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] gya = \
        np.ascontiguousarray(gy, dtype=np.float64)
    cdef Py_ssize_t h = gxa.shape[0], w = gxa.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] out = np.empty((h, w))
    cdef Py_ssize_t i, j, im
    with nogil:
        for i in range(h):
            im = i - 1 if i > 0 else h - 1
            out[i, 0] = gxa[i, w - 1] - gxa[i, 0] + gya[im, 0] - gya[i, 0]
            for j in range(1, w):
                out[i, j] = gxa[i, j - 1] - gxa[i, j] + gya[im, j] - gya[i, j]
    return out


def gram_tv(x):
    """div2(grad2(x)) fused: the positive-semidefinite periodic 5-point stencil."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] xa = \
        np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t h = xa.shape[0], w = xa.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] out = np.empty((h, w))
    cdef Py_ssize_t i, j, ip, im, jp, jm
    with nogil:
        for i in range(h):
            ip = i + 1 if i + 1 < h else 0
            im = i - 1 if i > 0 else h - 1
            for j in range(w):
                jp = j + 1 if j + 1 < w else 0
                jm = j - 1 if j > 0 else w - 1
                out[i, j] = 4.0 * xa[i, j] - xa[i, jp] - xa[i, jm] \
                    - xa[ip, j] - xa[im, j]
    return out


def soft_threshold(v, double tau):
    """Elementwise sign(v) * max(|v| - tau, 0) for tau >= 0."""
    if tau < 0:
        raise ValueError("soft_threshold requires tau >= 0, got %r" % (tau,))
    cdef cnp.ndarray va = np.ascontiguousarray(v, dtype=np.float64)
    cdef cnp.ndarray out_nd = np.empty_like(va)
    cdef double[::1] vf = va.ravel()
    cdef double[::1] of = out_nd.ravel()
    cdef Py_ssize_t n = vf.shape[0], i
    cdef double t
    with nogil:
        for i in range(n):
            t = vf[i]
            if t > tau:
                of[i] = t - tau
            elif t < -tau:
                of[i] = t + tau
            else:
                of[i] = 0.0
    return out_nd
