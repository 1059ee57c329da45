# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled switched-state recursion; mirrors ``_reference.state_recursion``."""

import numpy as np


def state_recursion(a_closed, a_open, gamma, noise, x0):
    """Run the two-mode linear recursion, returning every post-update state.

    Same contract as the NumPy reference: gamma selects the closed or open
    mode per slot, noise is added after the mode map, and the returned
    array holds x_1 .. x_N.
    """
    ac = np.ascontiguousarray(a_closed, dtype=np.float64)
    ao = np.ascontiguousarray(a_open, dtype=np.float64)
    gam = np.ascontiguousarray(gamma, dtype=np.uint8)
    w = np.ascontiguousarray(noise, dtype=np.float64)
    x_init = np.ascontiguousarray(x0, dtype=np.float64)

    cdef Py_ssize_t n_slots = gam.shape[0]
    cdef Py_ssize_t n = x_init.shape[0]
    out_arr = np.empty((n_slots, n), dtype=np.float64)
    x_arr = x_init.copy()

    cdef const double[:, ::1] acv = ac
    cdef const double[:, ::1] aov = ao
    cdef const unsigned char[::1] gv = gam
    cdef const double[:, ::1] wv = w
    cdef double[::1] xv = x_arr
    cdef double[:, ::1] outv = out_arr

    cdef Py_ssize_t k, i, j
    cdef double acc
    cdef const double[:, ::1] a

    for k in range(n_slots):
        a = acv if gv[k] else aov
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += a[i, j] * xv[j]
            outv[k, i] = acc + wv[k, i]
        for i in range(n):
            xv[i] = outv[k, i]
    return out_arr
