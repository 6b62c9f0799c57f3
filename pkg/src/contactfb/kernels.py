"""Batched polynomial evaluation with a compiled fast path.

The inner loop of every sampled check (shell-avoidance sampling, penalty
evaluation in the disk search, finite-difference oracles) is "evaluate a
low-degree complex polynomial and its derivative at many points".  A Cython
kernel covers that loop when the extension is available; otherwise a
vectorized numpy Horner scheme is used.  Both paths return identical arrays
up to floating-point associativity.
"""

from __future__ import annotations

import numpy as np

try:
    from . import _speedups
except ImportError:  # pragma: no cover - depends on build environment
    _speedups = None

USING_SPEEDUPS = _speedups is not None


def poly_eval_many_numpy(coeffs, points):
    """Pure-numpy Horner evaluation of p and p' at many points."""
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    points = np.ascontiguousarray(points, dtype=np.complex128)
    values = np.zeros_like(points)
    derivs = np.zeros_like(points)
    for c in coeffs[::-1]:
        derivs = derivs * points + values
        values = values * points + c
    return values, derivs


def poly_eval_many_compiled(coeffs, points):
    """Compiled Horner evaluation; raises if the extension is missing."""
    if _speedups is None:
        raise RuntimeError("contactfb._speedups extension is not available")
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    points = np.ascontiguousarray(points, dtype=np.complex128)
    return _speedups.poly_eval_many(coeffs, points)


def poly_eval_many(coeffs, points):
    """Evaluate a dense complex polynomial and its derivative at many points.

    coeffs is ordered by ascending power.  Returns (values, derivatives) as
    complex128 arrays of the same shape as points.
    """
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    points = np.asarray(points, dtype=np.complex128)
    if coeffs.size == 0:
        z = np.zeros(points.shape, dtype=np.complex128)
        return z, z.copy()
    flat = np.ascontiguousarray(points.ravel())
    if _speedups is not None:
        values, derivs = _speedups.poly_eval_many(coeffs, flat)
    else:
        values, derivs = poly_eval_many_numpy(coeffs, flat)
    return values.reshape(points.shape), derivs.reshape(points.shape)
