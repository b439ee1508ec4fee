# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled 1-D convolution passes along one image axis.

Each output sample is accumulated as ``0.0 + w[0]*x[0] + w[1]*x[1] + ...`` in
tap order, matching ``_pykernels`` exactly. Rows are distributed over OpenMP
threads; since every output sample is computed by one thread in a fixed
order, results do not depend on the thread count.
"""
from cython.parallel cimport prange


def convolve_axis(const double[:, :, ::1] src, const double[::1] weights,
                  const Py_ssize_t[::1] index_map, int axis,
                  double[:, :, ::1] out, int num_threads=1):
    cdef Py_ssize_t h = src.shape[0]
    cdef Py_ssize_t w = src.shape[1]
    cdef Py_ssize_t c = src.shape[2]
    cdef Py_ssize_t taps = weights.shape[0]
    cdef Py_ssize_t y, x, k, j, row
    cdef double acc, wj
    if num_threads < 1:
        num_threads = 1

    if axis == 1:
        if index_map.shape[0] != w + taps - 1:
            raise ValueError("index map length does not match image width")
        for y in prange(h, nogil=True, num_threads=num_threads, schedule="static"):
            for x in range(w):
                for k in range(c):
                    acc = 0.0
                    for j in range(taps):
                        acc = acc + weights[j] * src[y, index_map[x + j], k]
                    out[y, x, k] = acc
    elif axis == 0:
        if index_map.shape[0] != h + taps - 1:
            raise ValueError("index map length does not match image height")
        for y in prange(h, nogil=True, num_threads=num_threads, schedule="static"):
            for x in range(w):
                for k in range(c):
                    out[y, x, k] = 0.0
            for j in range(taps):
                row = index_map[y + j]
                wj = weights[j]
                for x in range(w):
                    for k in range(c):
                        out[y, x, k] = out[y, x, k] + wj * src[row, x, k]
    else:
        raise ValueError("axis must be 0 or 1")
