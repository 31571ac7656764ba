# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled ray tracer; mirrors ``_fallback.siddon_system`` step for step."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, floor, fabs, INFINITY
from libc.stdlib cimport qsort

cnp.import_array()

cdef double _MIN_SEGMENT = 1e-12


cdef int _cmp(const void* a, const void* b) noexcept nogil:
    cdef double x = (<double*>a)[0]
    cdef double y = (<double*>b)[0]
    return (x > y) - (x < y)


def siddon_system(Py_ssize_t ny, Py_ssize_t nx, angles, Py_ssize_t det_count,
                  double det_spacing=1.0):
    cdef double[::1] ang = np.ascontiguousarray(angles, dtype=np.float64)
    cdef Py_ssize_t n_ang = ang.shape[0]
    cdef double half_x = 0.5 * nx, half_y = 0.5 * ny
    cdef Py_ssize_t cap = nx + ny + 2
    cdef double[::1] t = np.empty(cap + 2, dtype=np.float64)
    # every ray crosses at most nx + ny + 1 pixels
    cdef Py_ssize_t max_nnz = n_ang * det_count * (nx + ny + 1)
    cdef cnp.int64_t[::1] rows = np.empty(max_nnz, dtype=np.int64)
    cdef cnp.int64_t[::1] cols = np.empty(max_nnz, dtype=np.int64)
    cdef double[::1] vals = np.empty(max_nnz, dtype=np.float64)
    cdef Py_ssize_t a, b, k, cnt, nnz = 0
    cdef double c, sn, s, x0, y0, t_lo, t_hi, lo, hi, tk, seg, mid
    cdef Py_ssize_t i, j
    cdef bint hit
    for a in range(n_ang):
        c = cos(ang[a])
        sn = sin(ang[a])
        for b in range(det_count):
            s = (b - 0.5 * (det_count - 1)) * det_spacing
            x0 = s * c
            y0 = s * sn
            t_lo = -INFINITY
            t_hi = INFINITY
            hit = True
            if fabs(sn) > 1e-15:
                lo = (x0 - half_x) / sn
                hi = (x0 + half_x) / sn
                if lo > hi:
                    lo, hi = hi, lo
                t_lo = max(t_lo, lo)
                t_hi = min(t_hi, hi)
            elif not (-half_x <= x0 <= half_x):
                hit = False
            if fabs(c) > 1e-15:
                lo = (-half_y - y0) / c
                hi = (half_y - y0) / c
                if lo > hi:
                    lo, hi = hi, lo
                t_lo = max(t_lo, lo)
                t_hi = min(t_hi, hi)
            elif not (-half_y <= y0 <= half_y):
                hit = False
            if not hit or t_hi - t_lo <= _MIN_SEGMENT:
                continue
            cnt = 0
            t[cnt] = t_lo
            cnt += 1
            t[cnt] = t_hi
            cnt += 1
            if fabs(sn) > 1e-15:
                for k in range(nx + 1):
                    tk = (x0 - (k - half_x)) / sn
                    if t_lo <= tk <= t_hi:
                        t[cnt] = tk
                        cnt += 1
            if fabs(c) > 1e-15:
                for k in range(ny + 1):
                    tk = ((k - half_y) - y0) / c
                    if t_lo <= tk <= t_hi:
                        t[cnt] = tk
                        cnt += 1
            qsort(&t[0], cnt, sizeof(double), _cmp)
            for k in range(cnt - 1):
                seg = t[k + 1] - t[k]
                if seg <= _MIN_SEGMENT:
                    continue
                mid = 0.5 * (t[k] + t[k + 1])
                j = <Py_ssize_t>floor(x0 - mid * sn + half_x)
                i = <Py_ssize_t>floor(y0 + mid * c + half_y)
                j = 0 if j < 0 else (nx - 1 if j > nx - 1 else j)
                i = 0 if i < 0 else (ny - 1 if i > ny - 1 else i)
                rows[nnz] = a * det_count + b
                cols[nnz] = i * nx + j
                vals[nnz] = seg
                nnz += 1
    return (np.asarray(rows[:nnz]).copy(), np.asarray(cols[:nnz]).copy(),
            np.asarray(vals[:nnz]).copy())
