# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled inner loops. ``gspec._kernels_py`` mirrors every function here."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, pow, fmod, sqrt, floor, M_PI

cnp.import_array()


def scatter_products(const double[::1] va, const long[::1] offa,
                     const double[::1] vb, const long[::1] offb,
                     double[::1] out):
    cdef Py_ssize_t i, j
    cdef Py_ssize_t na = va.shape[0], nb = vb.shape[0]
    cdef double a
    cdef long oa
    for i in range(na):
        a = va[i]
        if a == 0.0:
            continue
        oa = offa[i]
        for j in range(nb):
            out[oa + offb[j]] += a * vb[j]


def torus_lp_norms(const double[:, ::1] cre, const double[:, ::1] cim,
                   double p, Py_ssize_t n_points):
    cdef Py_ssize_t m = cre.shape[0], K = cre.shape[1]
    cdef Py_ssize_t i, j, t, k
    # tables are point-major so the inner frequency loop is contiguous
    cdef double[:, ::1] ct = np.empty((n_points, K))
    cdef double[:, ::1] st = np.empty((n_points, K))
    cdef double[::1] out = np.empty(m)
    cdef double re, im, acc, ang, s, v
    cdef double half = 0.5 * p
    cdef int odd = p == floor(p) and (<long>p) % 2 == 1 and p < 64
    cdef long hp = <long>((p - 1) / 2)
    for t in range(n_points):
        for j in range(K):
            ang = 2.0 * M_PI * j * t / n_points
            ct[t, j] = cos(ang)
            st[t, j] = sin(ang)
    with nogil:
        for i in range(m):
            acc = 0.0
            for t in range(n_points):
                re = 0.0
                im = 0.0
                for j in range(K):
                    re = re + cre[i, j] * ct[t, j] - cim[i, j] * st[t, j]
                    im = im + cre[i, j] * st[t, j] + cim[i, j] * ct[t, j]
                s = re * re + im * im
                if odd:
                    v = sqrt(s)
                    for k in range(hp):
                        v = v * s
                    acc += v
                else:
                    acc += pow(s, half)
            out[i] = pow(acc / n_points, 1.0 / p)
    return np.asarray(out)


cdef inline double _wrap(double d):
    d = fmod(d + M_PI, 2.0 * M_PI)
    if d < 0:
        d += 2.0 * M_PI
    return d - M_PI


def unwrap_bfs(const double[::1] phase, const unsigned char[::1] mask,
               const long[::1] shape, Py_ssize_t start):
    cdef Py_ssize_t total = phase.shape[0]
    cdef Py_ssize_t ndim = shape.shape[0]
    cdef double[::1] out = np.zeros(total)
    cdef unsigned char[::1] seen = np.zeros(total, dtype=np.uint8)
    cdef long[::1] queue = np.empty(total, dtype=np.int_)
    cdef long[::1] stride = np.empty(ndim, dtype=np.int_)
    cdef Py_ssize_t head = 0, tail = 0, d, cur, nb
    cdef long coord, s
    cdef int step
    s = 1
    for d in range(ndim - 1, -1, -1):
        stride[d] = s
        s *= shape[d]
    out[start] = phase[start]
    seen[start] = 1
    queue[tail] = start
    tail += 1
    while head < tail:
        cur = queue[head]
        head += 1
        for d in range(ndim):
            coord = (cur // stride[d]) % shape[d]
            for step in (-1, 1):
                if coord + step < 0 or coord + step >= shape[d]:
                    continue
                nb = cur + step * stride[d]
                if seen[nb] or not mask[nb]:
                    continue
                seen[nb] = 1
                out[nb] = out[cur] + _wrap(phase[nb] - phase[cur])
                queue[tail] = nb
                tail += 1
    return np.asarray(out), np.asarray(seen).astype(bool)
