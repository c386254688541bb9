# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled all-pairs difference-quotient scan."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, hypot, pow

cnp.import_array()


def pair_scan(double[:, ::1] D, double[:, ::1] pts, double s):
    cdef Py_ssize_t n = D.shape[1]
    cdef Py_ssize_t nd = D.shape[0]
    cdef Py_ssize_t i, j, m
    cdef double best = 0.0
    cdef double dx, dy, dist, num, q
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                dx = pts[0, i] - pts[0, j]
                dy = pts[1, i] - pts[1, j]
                dist = hypot(dx, dy)
                if dist == 0.0:
                    continue
                num = 0.0
                for m in range(nd):
                    num = num + fabs(D[m, i] - D[m, j])
                q = num / pow(dist, s)
                if q > best:
                    best = q
    return best
