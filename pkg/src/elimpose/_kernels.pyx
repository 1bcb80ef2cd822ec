# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels of the online stage.

``instantiate`` expands generators under a linear substitution of their
variables; ``gauss_jordan`` is the template elimination.  Both have a numpy
twin in ``_kernels_py`` with the same signature and results.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def instantiate(const double[:, ::1] L, const cnp.int64_t[:, ::1] t_vars, const cnp.int64_t[::1] t_deg,
                const double[::1] t_coef, const cnp.int64_t[::1] t_out, const cnp.int64_t[::1] mul,
                const cnp.int64_t[::1] mul_off, const cnp.int64_t[::1] sizes, Py_ssize_t out_len):
    """Coefficients of sum_t coef_t * prod_k (L[var_tk] . u) in homogeneous u.

    Degree-k monomial i times u_v is degree-(k+1) monomial
    ``mul[mul_off[k] + i*m + v]``; term t adds into ``out[t_out[t]:]``.
    """
    cdef Py_ssize_t m = L.shape[1]
    cdef Py_ssize_t T = t_vars.shape[0]
    cdef Py_ssize_t maxsize = 1
    cdef Py_ssize_t t, k, i, v, d, var, off, n0, n1
    cdef double a, c
    for k in range(sizes.shape[0]):
        if sizes[k] > maxsize:
            maxsize = sizes[k]
    out_arr = np.zeros(out_len, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[::1] b0 = np.empty(maxsize, dtype=np.float64)
    cdef double[::1] b1 = np.empty(maxsize, dtype=np.float64)
    cdef double[::1] tmp
    for t in range(T):
        d = t_deg[t]
        b0[0] = t_coef[t]
        for k in range(d):
            var = t_vars[t, k]
            n0 = sizes[k]
            n1 = sizes[k + 1]
            off = mul_off[k]
            for i in range(n1):
                b1[i] = 0.0
            for i in range(n0):
                a = b0[i]
                if a != 0.0:
                    for v in range(m):
                        c = L[var, v]
                        if c != 0.0:
                            b1[mul[off + i * m + v]] += a * c
            tmp = b0
            b0 = b1
            b1 = tmp
        off = t_out[t]
        for i in range(sizes[d]):
            out[off + i] += b0[i]
    return out_arr


def gauss_jordan(double[:, ::1] A, double rel_tol):
    """In-place reduced row echelon form with partial pivoting.

    Columns are visited left to right; the pivot is the largest magnitude
    entry at or below the current row (first one on ties).  A column whose
    best candidate is at most ``rel_tol * max|A|`` gets no pivot.  Returns
    the pivot column of each row, -1 past the rank.
    """
    cdef Py_ssize_t nr = A.shape[0], nc = A.shape[1]
    cdef Py_ssize_t r = 0, c, i, j, p
    cdef double best, val, scale = 0.0, piv, f, thresh
    piv_arr = np.full(nr, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] pivots = piv_arr
    for i in range(nr):
        for j in range(nc):
            val = fabs(A[i, j])
            if val > scale:
                scale = val
    thresh = rel_tol * scale
    for c in range(nc):
        if r == nr:
            break
        p = r
        best = fabs(A[r, c])
        for i in range(r + 1, nr):
            val = fabs(A[i, c])
            if val > best:
                best = val
                p = i
        if best <= thresh:
            continue
        if p != r:
            for j in range(c, nc):
                val = A[r, j]
                A[r, j] = A[p, j]
                A[p, j] = val
        piv = 1.0 / A[r, c]
        for j in range(c, nc):
            A[r, j] *= piv
        A[r, c] = 1.0
        for i in range(nr):
            if i != r:
                f = A[i, c]
                if f != 0.0:
                    for j in range(c, nc):
                        A[i, j] -= f * A[r, j]
                    A[i, c] = 0.0
        pivots[r] = c
        r += 1
    return piv_arr
