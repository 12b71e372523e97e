# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops for :mod:`rmtcorr`.

jacobi_eigh
    Jacobi eigenvalue iteration for dense symmetric matrices. Rotations are
    scheduled in round-robin (tournament) order so that every round applies
    ``n // 2`` disjoint plane rotations as two streaming passes over the
    matrix.
increasing_path_sum
    Sum of cyclic entry products over all strictly increasing index tuples.

Both mirror the pure-Python versions in :mod:`rmtcorr._fallback`, which are
used when this extension is not built.
"""

from libc.math cimport fabs, sqrt

import numpy as np


cdef double _off_norm(double[:, ::1] a) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0], i, j
    cdef double acc = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            acc += a[i, j] * a[i, j]
    return sqrt(2.0 * acc)


cdef void _rotate_columns(double[:, ::1] a, Py_ssize_t[::1] P, Py_ssize_t[::1] Q,
                          double[::1] C, double[::1] S,
                          Py_ssize_t npairs) noexcept nogil:
    # a <- a J, one row at a time so the row stays in L1
    cdef Py_ssize_t r, k, p, q, n = a.shape[0]
    cdef double c, s, g, h
    for r in range(n):
        for k in range(npairs):
            p = P[k]
            q = Q[k]
            c = C[k]
            s = S[k]
            g = a[r, p]
            h = a[r, q]
            a[r, p] = c * g - s * h
            a[r, q] = s * g + c * h


cdef void _rotate_rows(double[:, ::1] a, Py_ssize_t[::1] P, Py_ssize_t[::1] Q,
                       double[::1] C, double[::1] S,
                       Py_ssize_t npairs) noexcept nogil:
    # a <- J' a, contiguous row pairs
    cdef Py_ssize_t r, k, n = a.shape[1]
    cdef double c, s, g, h
    cdef double* rp
    cdef double* rq
    for k in range(npairs):
        c = C[k]
        s = S[k]
        rp = &a[P[k], 0]
        rq = &a[Q[k], 0]
        for r in range(n):
            g = rp[r]
            h = rq[r]
            rp[r] = c * g - s * h
            rq[r] = s * g + c * h


def jacobi_eigh(double[:, ::1] a, bint want_vectors=True, double rtol=1e-13,
                int max_sweeps=100):
    """Diagonalize the symmetric matrix ``a`` in place.

    Iterates until the off-diagonal Frobenius norm drops below
    ``rtol * ||a||_F`` or ``max_sweeps`` sweeps have run.

    Returns ``(eigenvalues, vectors, sweeps, off_norm)``; eigenvalues are in
    storage order and ``vectors`` is ``None`` unless requested.
    """
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = n + (n % 2)
    cdef Py_ssize_t half = m // 2
    cdef Py_ssize_t rnd, k, p, q, i, j, npairs, last
    cdef int sweep = 0
    cdef double apq, app, aqq, theta, t, c, off, total = 0.0, target
    cdef double[:, ::1] v
    cdef Py_ssize_t[::1] players = np.arange(m, dtype=np.intp)
    cdef Py_ssize_t[::1] P = np.empty(max(half, 1), dtype=np.intp)
    cdef Py_ssize_t[::1] Q = np.empty(max(half, 1), dtype=np.intp)
    cdef double[::1] C = np.empty(max(half, 1))
    cdef double[::1] S = np.empty(max(half, 1))

    vectors = None
    if want_vectors:
        vectors = np.eye(n)
        v = vectors

    for i in range(n):
        for j in range(n):
            total += a[i, j] * a[i, j]
    target = rtol * sqrt(total)
    off = _off_norm(a)

    while off >= target and off > 0.0 and sweep < max_sweeps:
        sweep += 1
        for rnd in range(m - 1):
            npairs = 0
            for k in range(half):
                p = players[k]
                q = players[m - 1 - k]
                if p >= n or q >= n:
                    continue  # bye for odd n
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                if (sweep > 3 and fabs(app) + 100.0 * fabs(apq) == fabs(app)
                        and fabs(aqq) + 100.0 * fabs(apq) == fabs(aqq)):
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                theta = (aqq - app) / (2.0 * apq)
                if fabs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                P[npairs] = p
                Q[npairs] = q
                C[npairs] = c
                S[npairs] = t * c
                npairs += 1

            last = players[m - 1]
            for k in range(m - 1, 1, -1):
                players[k] = players[k - 1]
            players[1] = last

            if npairs == 0:
                continue
            _rotate_columns(a, P, Q, C, S, npairs)
            _rotate_rows(a, P, Q, C, S, npairs)
            for k in range(npairs):
                a[P[k], Q[k]] = 0.0
                a[Q[k], P[k]] = 0.0
            if want_vectors:
                _rotate_columns(v, P, Q, C, S, npairs)
        off = _off_norm(a)

    w = np.empty(n, dtype=np.float64)
    for i in range(n):
        w[i] = a[i, i]
    return w, vectors, sweep, off


def increasing_path_sum(double[:, ::1] m, int k):
    """Sum of ``m[s1,s2] m[s2,s3] ... m[sk,s1]`` over all ``s1 < ... < sk``."""
    cdef Py_ssize_t n = m.shape[0]
    cdef Py_ssize_t i, j
    cdef double total = 0.0, prod
    cdef Py_ssize_t[64] idx
    if k < 1 or k > n:
        raise ValueError("k must satisfy 1 <= k <= n")
    if k > 64:
        raise ValueError("k > 64 is not supported")
    for i in range(k):
        idx[i] = i
    while True:
        prod = m[idx[k - 1], idx[0]]
        for j in range(k - 1):
            prod *= m[idx[j], idx[j + 1]]
        total += prod
        i = k - 1
        while i >= 0 and idx[i] == n - k + i:
            i -= 1
        if i < 0:
            break
        idx[i] += 1
        for j in range(i + 1, k):
            idx[j] = idx[j - 1] + 1
    return total
