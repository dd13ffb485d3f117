# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled im2col / col2im kernels; see ``_fallback.py`` for the layouts.

In channels-last layout the ``(dj, c)`` part of a receptive-field row is one
contiguous run of ``k * C`` values whenever the window lies inside the
image, so both kernels move whole runs and only fall back to per-element
bounds checks on padded borders.
"""
import numpy as np
cimport numpy as cnp
from cython cimport floating
from libc.string cimport memcpy, memset

cnp.import_array()


cdef void _im2col_impl(floating* x, floating* out, Py_ssize_t n, Py_ssize_t h, Py_ssize_t w,
                       Py_ssize_t c, Py_ssize_t k, Py_ssize_t pad) noexcept nogil:
    cdef Py_ssize_t ho = h + 2 * pad - k + 1, wo = w + 2 * pad - k + 1
    cdef Py_ssize_t run = k * c
    cdef Py_ssize_t s, i, j, di, dj, r, q
    cdef floating* src
    cdef floating* dst = out
    for s in range(n):
        for i in range(ho):
            for j in range(wo):
                for di in range(k):
                    r = i + di - pad
                    if r < 0 or r >= h:
                        memset(dst, 0, run * sizeof(floating))
                    elif j - pad >= 0 and j - pad + k <= w:
                        src = x + ((s * h + r) * w + (j - pad)) * c
                        memcpy(dst, src, run * sizeof(floating))
                    else:
                        for dj in range(k):
                            q = j + dj - pad
                            if 0 <= q < w:
                                memcpy(dst + dj * c, x + ((s * h + r) * w + q) * c, c * sizeof(floating))
                            else:
                                memset(dst + dj * c, 0, c * sizeof(floating))
                    dst += run


cdef void _col2im_impl(floating* cols, floating* out, Py_ssize_t n, Py_ssize_t h, Py_ssize_t w,
                       Py_ssize_t c, Py_ssize_t k, Py_ssize_t pad) noexcept nogil:
    cdef Py_ssize_t ho = h + 2 * pad - k + 1, wo = w + 2 * pad - k + 1
    cdef Py_ssize_t run = k * c
    cdef Py_ssize_t s, i, j, di, dj, r, q, t
    cdef floating* src = cols
    cdef floating* dst
    for s in range(n):
        for i in range(ho):
            for j in range(wo):
                for di in range(k):
                    r = i + di - pad
                    if r < 0 or r >= h:
                        pass
                    elif j - pad >= 0 and j - pad + k <= w:
                        dst = out + ((s * h + r) * w + (j - pad)) * c
                        for t in range(run):
                            dst[t] += src[t]
                    else:
                        for dj in range(k):
                            q = j + dj - pad
                            if 0 <= q < w:
                                dst = out + ((s * h + r) * w + q) * c
                                for t in range(c):
                                    dst[t] += src[dj * c + t]
                    src += run


def _as_float(a):
    a = np.ascontiguousarray(a)
    if a.dtype != np.float32 and a.dtype != np.float64:
        a = a.astype(np.float64)
    return a


def im2col(x, Py_ssize_t k, Py_ssize_t pad):
    x = _as_float(x)
    cdef Py_ssize_t n = x.shape[0], h = x.shape[1], w = x.shape[2], c = x.shape[3]
    cdef Py_ssize_t ho = h + 2 * pad - k + 1, wo = w + 2 * pad - k + 1
    out = np.empty((n * ho * wo, k * k * c), dtype=x.dtype)
    cdef float[:, :, :, ::1] xf
    cdef float[:, ::1] of
    cdef double[:, :, :, ::1] xd
    cdef double[:, ::1] od
    if out.size == 0:
        return out
    if x.dtype == np.float32:
        xf, of = x, out
        with nogil:
            _im2col_impl(&xf[0, 0, 0, 0], &of[0, 0], n, h, w, c, k, pad)
    else:
        xd, od = x, out
        with nogil:
            _im2col_impl(&xd[0, 0, 0, 0], &od[0, 0], n, h, w, c, k, pad)
    return out


def col2im(cols, shape, Py_ssize_t k, Py_ssize_t pad):
    cols = _as_float(cols)
    cdef Py_ssize_t n = shape[0], h = shape[1], w = shape[2], c = shape[3]
    out = np.zeros((n, h, w, c), dtype=cols.dtype)
    cdef float[:, :, :, ::1] of
    cdef float[:, ::1] cf
    cdef double[:, :, :, ::1] od
    cdef double[:, ::1] cd
    if cols.size == 0:
        return out
    if cols.dtype == np.float32:
        cf, of = cols, out
        with nogil:
            _col2im_impl(&cf[0, 0], &of[0, 0, 0, 0], n, h, w, c, k, pad)
    else:
        cd, od = cols, out
        with nogil:
            _col2im_impl(&cd[0, 0], &od[0, 0, 0, 0], n, h, w, c, k, pad)
    return out
