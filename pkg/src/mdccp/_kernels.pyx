# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops; see _kernels_py for the reference."""

import numpy as np
from libc.math cimport pow, log, exp


def moving_average(const double[::1] profile, Py_ssize_t window, bint literal=False):
    cdef Py_ssize_t n = profile.shape[0], k, j, lo
    cdef double acc
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    for k in range(n):
        lo = k - window if k >= window else 0
        acc = profile[k]
        j = k - 1
        while j >= lo:
            acc += profile[j]
            j -= 1
        if literal:
            out[k] = acc / window
        else:
            out[k] = acc / (k - lo + 1)
    return out_arr


def box_cov(const double[:, ::1] resid, starts, Py_ssize_t s):
    cdef Py_ssize_t[::1] st = np.ascontiguousarray(starts, dtype=np.intp)
    cdef Py_ssize_t n_boxes = st.shape[0], n_assets = resid.shape[0]
    cdef Py_ssize_t b, i, j, o, p
    cdef double acc
    out_arr = np.empty((n_boxes, n_assets, n_assets))
    cdef double[:, :, ::1] out = out_arr
    for b in range(n_boxes):
        p = st[b]
        for i in range(n_assets):
            for j in range(i, n_assets):
                acc = 0.0
                for o in range(s):
                    acc += resid[i, p + o] * resid[j, p + o]
                acc /= s
                out[b, i, j] = acc
                out[b, j, i] = acc
    return out_arr


def power_means(const double[:, ::1] a, qs, bint q0_literal=False):
    cdef double[::1] qv = np.ascontiguousarray(qs, dtype=np.float64)
    cdef Py_ssize_t n_boxes = a.shape[0], n_cols = a.shape[1], n_q = qv.shape[0]
    cdef Py_ssize_t b, k, iq
    cdef double hi, lo, acc, q, v, log_sum
    out_arr = np.empty((n_q, n_cols))
    cdef double[:, ::1] out = out_arr
    # logs of a / max and a / min, shared by every order
    cdef double[::1] l_hi = np.empty(n_boxes)
    cdef double[::1] l_lo = np.empty(n_boxes)
    cdef double[::1] lg
    for k in range(n_cols):
        hi = a[0, k]
        lo = a[0, k]
        for b in range(1, n_boxes):
            v = a[b, k]
            if v > hi:
                hi = v
            if v < lo:
                lo = v
        log_sum = 0.0
        for b in range(n_boxes):
            log_sum += log(a[b, k])
            l_hi[b] = log(a[b, k] / hi)
            l_lo[b] = log(a[b, k] / lo)
        for iq in range(n_q):
            q = qv[iq]
            if q == 0.0:
                if q0_literal:
                    out[iq, k] = exp(log_sum / (2 * n_boxes))
                else:
                    out[iq, k] = exp(log_sum / n_boxes)
                continue
            if q > 0 and hi == 0.0:
                out[iq, k] = 0.0
                continue
            lg = l_hi if q > 0 else l_lo
            acc = 0.0
            for b in range(n_boxes):
                acc += exp(q * lg[b])
            out[iq, k] = (hi if q > 0 else lo) * pow(acc / n_boxes, 1.0 / q)
    return out_arr
