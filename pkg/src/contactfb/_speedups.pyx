# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Horner kernel: batched evaluation of a complex polynomial and
its derivative at many points in a single C loop."""

import numpy as np


def poly_eval_many(double complex[::1] coeffs, double complex[::1] points):
    """Evaluate p and p' at every point; returns (values, derivatives)."""
    cdef Py_ssize_t m = points.shape[0]
    cdef Py_ssize_t d = coeffs.shape[0]
    values = np.zeros(m, dtype=np.complex128)
    derivs = np.zeros(m, dtype=np.complex128)
    cdef double complex[::1] v = values
    cdef double complex[::1] dv = derivs
    cdef double complex acc, dacc, z
    cdef Py_ssize_t i, k
    for i in range(m):
        z = points[i]
        acc = 0
        dacc = 0
        for k in range(d - 1, -1, -1):
            dacc = dacc * z + acc
            acc = acc * z + coeffs[k]
        v[i] = acc
        dv[i] = dacc
    return values, derivs
