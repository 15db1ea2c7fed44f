# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.

Every function here has a numpy twin in :mod:`fracdt._fallback` with the
same signature and semantics; :mod:`fracdt.backend` picks one at import.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()


cdef inline double _fmax(double a, double b) noexcept nogil:
    return a if a > b else b


cdef inline double _fmin(double a, double b) noexcept nogil:
    return a if a < b else b


def range_scan(const double[:, ::1] S, Py_ssize_t gap):
    """Per column, max of |S[b] - S[a]| over row pairs with b - a >= gap."""
    cdef Py_ssize_t K = S.shape[0], P = S.shape[1]
    cdef Py_ssize_t b, p
    cdef double s
    out = np.zeros(P, dtype=np.float64)
    if K <= gap:
        return out
    lo_arr = np.full(P, INFINITY)
    hi_arr = np.full(P, -INFINITY)
    cdef double* best = <double*> cnp.PyArray_DATA(out)
    cdef double* lo = <double*> cnp.PyArray_DATA(lo_arr)
    cdef double* hi = <double*> cnp.PyArray_DATA(hi_arr)
    cdef const double* old
    cdef const double* cur
    with nogil:
        for b in range(gap, K):
            old = &S[b - gap, 0]
            cur = &S[b, 0]
            # branchless so the column loop vectorizes
            for p in range(P):
                lo[p] = _fmin(lo[p], old[p])
                hi[p] = _fmax(hi[p], old[p])
                s = cur[p]
                best[p] = _fmax(best[p], _fmax(s - lo[p], hi[p] - s))
    return out


cdef void _add_shifted(const double* f, double* acc, Py_ssize_t m, Py_ssize_t d) noexcept nogil:
    """acc[c] += f[(c + d) mod m], as two contiguous segments."""
    cdef Py_ssize_t c, split
    d = d % m
    if d < 0:
        d += m
    split = m - d
    for c in range(split):
        acc[c] += f[c + d]
    for c in range(split, m):
        acc[c] += f[c - split]


cdef void _absdev_shifted(const double* f, const double* mean, double* acc,
                          Py_ssize_t m, Py_ssize_t d) noexcept nogil:
    """acc[c] += |f[(c + d) mod m] - mean[c]|."""
    cdef Py_ssize_t c, split
    d = d % m
    if d < 0:
        d += m
    split = m - d
    for c in range(split):
        acc[c] += fabs(f[c + d] - mean[c])
    for c in range(split, m):
        acc[c] += fabs(f[c - split] - mean[c])


cdef void _max_shifted(const double* g, double* acc, Py_ssize_t m, Py_ssize_t d) noexcept nogil:
    """acc[c] = max(acc[c], g[(c + d) mod m])."""
    cdef Py_ssize_t c, split
    d = d % m
    if d < 0:
        d += m
    split = m - d
    for c in range(split):
        acc[c] = _fmax(acc[c], g[c + d])
    for c in range(split, m):
        acc[c] = _fmax(acc[c], g[c - split])


def mean_oscillation_1d(const double[::1] f, Py_ssize_t w):
    """Periodic mean of |f - f_B| over windows B = [c - w, c + w]."""
    cdef Py_ssize_t m = f.shape[0]
    cdef Py_ssize_t c, d
    cdef Py_ssize_t width = 2 * w + 1
    if width > m:
        raise ValueError("window wider than the grid")
    mean_arr = np.zeros(m, dtype=np.float64)
    out = np.zeros(m, dtype=np.float64)
    cdef double* mean = <double*> cnp.PyArray_DATA(mean_arr)
    cdef double* res = <double*> cnp.PyArray_DATA(out)
    cdef const double* fp = &f[0]
    # per center the terms are summed in offset order, as in the numpy twin,
    # so results agree bit for bit and stay exactly shift-equivariant
    with nogil:
        for d in range(-w, w + 1):
            _add_shifted(fp, mean, m, d)
        for c in range(m):
            mean[c] /= width
        for d in range(-w, w + 1):
            _absdev_shifted(fp, mean, res, m, d)
        for c in range(m):
            res[c] /= width
    return out


def window_max_1d(const double[::1] g, Py_ssize_t w):
    """Periodic max over [c - w, c + w] by van Herk / Gil-Werman blocks."""
    cdef Py_ssize_t m = g.shape[0]
    cdef Py_ssize_t width = 2 * w + 1
    cdef Py_ssize_t k, n, start, stop
    cdef double gmax
    out = np.empty(m, dtype=np.float64)
    cdef double* res = <double*> cnp.PyArray_DATA(out)
    if width >= m:
        gmax = g[0]
        for k in range(1, m):
            gmax = _fmax(gmax, g[k])
        for k in range(m):
            res[k] = gmax
        return out
    # ext[k] = g[(k - w) mod m]; window for center c is ext[c : c + width]
    n = m + 2 * w
    ext_arr = np.empty(n, dtype=np.float64)
    pre_arr = np.empty(n, dtype=np.float64)
    suf_arr = np.empty(n, dtype=np.float64)
    cdef double* ext = <double*> cnp.PyArray_DATA(ext_arr)
    cdef double* pre = <double*> cnp.PyArray_DATA(pre_arr)
    cdef double* suf = <double*> cnp.PyArray_DATA(suf_arr)
    with nogil:
        for k in range(w):
            ext[k] = g[m - w + k]
        for k in range(m):
            ext[w + k] = g[k]
        for k in range(w):
            ext[w + m + k] = g[k]
        # running max from each block start (pre) and to each block end (suf)
        for start in range(0, n, width):
            stop = start + width if start + width < n else n
            pre[start] = ext[start]
            for k in range(start + 1, stop):
                pre[k] = _fmax(pre[k - 1], ext[k])
            suf[stop - 1] = ext[stop - 1]
            for k in range(stop - 2, start - 1, -1):
                suf[k] = _fmax(suf[k + 1], ext[k])
        for k in range(m):
            res[k] = _fmax(suf[k], pre[k + width - 1])
    return out


def mean_oscillation_2d(const double[:, ::1] f, const Py_ssize_t[:, ::1] offsets):
    """Periodic mean oscillation over the stencil ``offsets`` (B x 2)."""
    cdef Py_ssize_t m0 = f.shape[0], m1 = f.shape[1]
    cdef Py_ssize_t B = offsets.shape[0]
    cdef Py_ssize_t i, k, ii
    mean_arr = np.zeros((m0, m1), dtype=np.float64)
    out = np.zeros((m0, m1), dtype=np.float64)
    cdef double* mean = <double*> cnp.PyArray_DATA(mean_arr)
    cdef double* res = <double*> cnp.PyArray_DATA(out)
    cdef const double* fp = &f[0, 0]
    with nogil:
        # offset-outer order matches the numpy twin term for term
        for k in range(B):
            for i in range(m0):
                ii = (i + offsets[k, 0]) % m0
                if ii < 0:
                    ii += m0
                _add_shifted(fp + ii * m1, mean + i * m1, m1, offsets[k, 1])
        for i in range(m0 * m1):
            mean[i] /= B
        for k in range(B):
            for i in range(m0):
                ii = (i + offsets[k, 0]) % m0
                if ii < 0:
                    ii += m0
                _absdev_shifted(fp + ii * m1, mean + i * m1, res + i * m1, m1, offsets[k, 1])
        for i in range(m0 * m1):
            res[i] /= B
    return out


def offset_max_2d(const double[:, ::1] g, const Py_ssize_t[:, ::1] offsets):
    """Periodic max of g over the stencil ``offsets`` (B x 2)."""
    cdef Py_ssize_t m0 = g.shape[0], m1 = g.shape[1]
    cdef Py_ssize_t B = offsets.shape[0]
    cdef Py_ssize_t i, k, ii
    out = np.full((m0, m1), -INFINITY, dtype=np.float64)
    cdef double* res = <double*> cnp.PyArray_DATA(out)
    cdef const double* gp = &g[0, 0]
    with nogil:
        for k in range(B):
            for i in range(m0):
                ii = (i + offsets[k, 0]) % m0
                if ii < 0:
                    ii += m0
                _max_shifted(gp + ii * m1, res + i * m1, m1, offsets[k, 1])
    return out
