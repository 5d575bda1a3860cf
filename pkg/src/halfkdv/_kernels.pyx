# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled time-step kernel: theta-weighted Picard iteration with a banded LU solve.

The banded factor comes from LAPACK ``dgbtrf`` (0-based pivots, band transposed);
the triangular solves below follow ``dgbtrs`` for the non-transposed case.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


cdef void _apply_f(const double[::1] u, double h, double ghost, double[::1] out) noexcept nogil:
    # out = D3 u + D1(u^2) on rows 1..n-2, with the constant ghost term on row n-2
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i
    cdef double h3 = 2.0 * h * h * h
    cdef double h1 = 2.0 * h
    out[0] = 0.0
    out[n - 1] = 0.0
    out[1] = (-3.0 * u[0] + 10.0 * u[1] - 12.0 * u[2] + 6.0 * u[3] - u[4]) / h3 \
        + (u[2] * u[2] - u[0] * u[0]) / h1
    for i in range(2, n - 2):
        out[i] = (-u[i - 2] + 2.0 * u[i - 1] - 2.0 * u[i + 1] + u[i + 2]) / h3 \
            + (u[i + 1] * u[i + 1] - u[i - 1] * u[i - 1]) / h1
    out[n - 2] = (-u[n - 4] + 2.0 * u[n - 3] + u[n - 2] - 2.0 * u[n - 1]) / h3 \
        + (u[n - 1] * u[n - 1] - u[n - 3] * u[n - 3]) / h1 + ghost


cdef void _band_solve(const double[:, ::1] ab, const int[::1] piv, int kl, int ku,
                      double[::1] b) noexcept nogil:
    cdef Py_ssize_t n = b.shape[0]
    cdef Py_ssize_t kd = kl + ku
    cdef Py_ssize_t j, i, l, lm, i0
    cdef double t
    if kl > 0:
        for j in range(n - 1):
            lm = kl if kl < n - 1 - j else n - 1 - j
            l = piv[j]
            t = b[l]
            if l != j:
                b[l] = b[j]
                b[j] = t
            if t != 0.0:
                for i in range(1, lm + 1):
                    b[j + i] -= t * ab[j, kd + i]
    for j in range(n - 1, -1, -1):
        if b[j] != 0.0:
            b[j] = b[j] * ab[j, kd + kl + 1]  # reciprocal pivot
            t = b[j]
            i0 = j - kd if j - kd > 0 else 0
            for i in range(j - 1, i0 - 1, -1):
                b[i] -= t * ab[j, kd + i - j]


def band_solve(double[:, ::1] ab, int[::1] piv, int kl, int ku, double[::1] b):
    """Solve in place with a transposed ``dgbtrf`` factor (see :func:`prepare_factor`)."""
    with nogil:
        _band_solve(ab, piv, kl, ku, b)


def apply_f(double[::1] u, double h, double ghost):
    """Return ``D3 u + D1(u^2)`` with zero boundary rows."""
    out = np.empty(u.shape[0])
    cdef double[::1] o = out
    with nogil:
        _apply_f(u, h, ghost, o)
    return out


def picard_step(double[:, ::1] ab, int[::1] piv, int kl, int ku,
                double[::1] u, double h, double dt, double theta,
                double left_val, double right_val,
                double ghost_old, double ghost_new,
                double tol, int max_iter):
    """Advance one step. Returns ``(v, iterations, last_update)``.

    Solves ``v - u + dt (theta F(v) + (1 - theta) F(u)) = 0`` by freezing the
    nonlinearity at the previous iterate; boundary rows hold the prescribed
    values.
    """
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i
    cdef int it = 0
    cdef double a = theta * dt
    cdef double b = (1.0 - theta) * dt
    cdef double h1 = 2.0 * h
    cdef double d, upd = 0.0
    base_arr = np.empty(n)
    v_arr = np.array(u, copy=True)
    r_arr = np.empty(n)
    cdef double[::1] base = base_arr
    cdef double[::1] v = v_arr
    cdef double[::1] r = r_arr
    with nogil:
        _apply_f(u, h, ghost_old, base)
        for i in range(n):
            base[i] = u[i] - b * base[i]
        while it < max_iter:
            r[0] = left_val
            r[n - 1] = right_val
            for i in range(1, n - 1):
                r[i] = base[i] - a * (v[i + 1] * v[i + 1] - v[i - 1] * v[i - 1]) / h1
            r[n - 2] -= a * ghost_new
            _band_solve(ab, piv, kl, ku, r)
            # clamp: pivoting leaves roundoff in the identity rows
            r[0] = left_val
            r[n - 1] = right_val
            upd = 0.0
            for i in range(n):
                d = fabs(r[i] - v[i])
                if d > upd:
                    upd = d
                v[i] = r[i]
            it += 1
            if upd <= tol:
                break
    return v_arr, it, upd


def prepare_factor(lu, piv, int kl, int ku):
    """Layout of the ``dgbtrf`` output expected by :func:`picard_step`.

    The band is stored transposed, one contiguous row per matrix column,
    with the reciprocal of the U diagonal appended as a last entry.
    """
    lu = np.asarray(lu, dtype=np.float64)
    abt = np.empty((lu.shape[1], lu.shape[0] + 1))
    abt[:, :-1] = lu.T
    abt[:, -1] = 1.0 / lu[kl + ku]
    return abt, np.ascontiguousarray(piv, dtype=np.int32)
