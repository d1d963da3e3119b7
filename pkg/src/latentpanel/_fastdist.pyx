# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled inner loops for pairwise pseudo-distance computation.

Both entry points consume Gram-style matrices and return max-abs column
differences; they are drop-in replacements for the NumPy fallbacks in
``distance.py`` and produce bit-identical results.

The probe exclusions (l == i, l == j) are handled by patching the two
affected cells of a scratch row so their contributions become exactly
zero, keeping the hot scan branchless.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, fmax

cnp.import_array()


def dist_all_pairs(double[:, ::1] G):
    """All ordered pairs: out[i, j] = max over l not in {i, j} of |G[i,l]-G[j,l]|."""
    cdef Py_ssize_t n = G.shape[0]
    out_arr = np.zeros((n, n), dtype=np.float64)
    scratch_arr = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] scratch = scratch_arr
    cdef Py_ssize_t i, j, l
    cdef double m, save_i, save_j
    with nogil:
        for i in range(n):
            for l in range(n):
                scratch[l] = G[i, l]
            for j in range(i + 1, n):
                save_j = scratch[j]
                save_i = scratch[i]
                scratch[j] = G[j, j]
                scratch[i] = G[j, i]
                m = 0.0
                for l in range(n):
                    m = fmax(m, fabs(scratch[l] - G[j, l]))
                scratch[j] = save_j
                scratch[i] = save_i
                out[i, j] = m
                out[j, i] = m
    return out_arr


def dist_fold(double[:, ::1] g_td, double[:, ::1] g_dd):
    """Fold block from gathered matrices.

    g_td[a, c] = G[targets[a], donors[c]] and g_dd[b, c] =
    G[donors[b], donors[c]]; returns out[a, b] = max over c != b of
    |g_td[a, c] - g_dd[b, c]| (targets never appear among donors).
    """
    cdef Py_ssize_t nt = g_td.shape[0]
    cdef Py_ssize_t nd = g_dd.shape[0]
    out_arr = np.zeros((nt, nd), dtype=np.float64)
    scratch_arr = np.empty(nd, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] scratch = scratch_arr
    cdef Py_ssize_t a, b, c
    cdef double m, save_b
    with nogil:
        for a in range(nt):
            for c in range(nd):
                scratch[c] = g_td[a, c]
            for b in range(nd):
                save_b = scratch[b]
                scratch[b] = g_dd[b, b]
                m = 0.0
                for c in range(nd):
                    m = fmax(m, fabs(scratch[c] - g_dd[b, c]))
                scratch[b] = save_b
                out[a, b] = m
    return out_arr
