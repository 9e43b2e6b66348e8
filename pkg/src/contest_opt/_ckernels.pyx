# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_pykernels``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def canonical_sweep(const double[::1] theta, const double[::1] Q, double eta, double u0):
    cdef Py_ssize_t j, m = theta.shape[0]
    out = np.empty(m)
    cdef double[::1] U = out
    cdef double prev
    if m == 0:
        return out
    U[0] = u0 if u0 < Q[0] else Q[0]
    for j in range(1, m):
        prev = U[j - 1] + eta * (theta[j] - theta[j - 1])
        U[j] = prev if prev < Q[j] else Q[j]
    return out


def coarse_allocate(signals, const double[::1] pool_lo, const double[::1] pool_hi, double k):
    cdef const double[:, ::1] s = np.ascontiguousarray(signals, dtype=np.float64)
    cdef Py_ssize_t S = s.shape[0], n = s.shape[1], P = pool_lo.shape[0]
    cdef Py_ssize_t a, i, j, lo_i, hi_i, mid
    out = np.empty((S, n))
    cdef double[:, ::1] x = out
    cdef double[::1] ceil = np.empty(n)
    cdef double v, r, z
    for a in range(S):
        for i in range(n):
            v = s[a, i]
            ceil[i] = v
            # last pool with lo < v (pools are sorted and disjoint)
            lo_i = 0
            hi_i = P
            while lo_i < hi_i:
                mid = (lo_i + hi_i) // 2
                if pool_lo[mid] < v:
                    lo_i = mid + 1
                else:
                    hi_i = mid
            if lo_i > 0 and v < pool_hi[lo_i - 1]:
                ceil[i] = pool_hi[lo_i - 1]
        for i in range(n):
            r = 0.0
            z = 0.0
            for j in range(n):
                if s[a, j] > ceil[i]:
                    r += 1.0
                if ceil[j] == ceil[i]:
                    z += 1.0
            v = (k - r) / z
            x[a, i] = 0.0 if v < 0.0 else (1.0 if v > 1.0 else v)
    return out


def pair_rule_moments(const double[::1] cs, const long long[::1] cp, const double[::1] cu,
                      const double[::1] cr, const double[::1] os_, const long long[::1] op,
                      const double[::1] ou, const double[::1] orr, Py_ssize_t ref):
    cdef Py_ssize_t C = cs.shape[0], S = os_.shape[0], c, t
    mean_a = np.zeros(C)
    sq_a = np.zeros(C)
    cross_a = np.zeros(C)
    xref_a = np.empty(S)
    cdef double[::1] mean = mean_a, sq = sq_a, cross = cross_a, xref = xref_a
    cdef double x, acc, acc2, accx
    with nogil:
        for t in range(S):
            xref[t] = _win(cs[ref], cp[ref], cu[ref], cr[ref], os_[t], op[t], ou[t], orr[t])
        for c in range(C):
            acc = 0.0
            acc2 = 0.0
            accx = 0.0
            for t in range(S):
                x = _win(cs[c], cp[c], cu[c], cr[c], os_[t], op[t], ou[t], orr[t])
                acc += x
                acc2 += x * x
                accx += x * xref[t]
            mean[c] = acc / S
            sq[c] = acc2 / S
            cross[c] = accx / S
    return mean_a, sq_a, cross_a


cdef inline double _win(double s, long long p, double u, double r,
                        double so, long long po, double uo, double ro) nogil:
    if p >= 0 and p == po:
        if u > uo:
            return 0.5 + 0.5 * ro
        if u < uo:
            return 0.5 - 0.5 * r
        return 0.5
    if s > so:
        return 1.0
    if s < so:
        return 0.0
    return 0.5


def vcg_utilities(types, keys, Py_ssize_t k, double eta):
    cdef const double[:, ::1] t = np.ascontiguousarray(types, dtype=np.float64)
    cdef const double[:, ::1] key = np.ascontiguousarray(keys, dtype=np.float64)
    cdef Py_ssize_t S = t.shape[0], n = t.shape[1], a, i, j, m
    out = np.zeros((S, n))
    cdef double[:, ::1] u = out
    # top[0..m) holds the k + 1 highest agents of the profile, best first
    cdef Py_ssize_t[::1] top = np.empty(k + 1, dtype=np.intp)
    cdef double thr, v
    with nogil:
        for a in range(S):
            m = 0
            for i in range(n):
                if m == k + 1 and not _above(t[a, i], key[a, i], t[a, top[k]], key[a, top[k]]):
                    continue
                j = m if m < k + 1 else k
                while j > 0 and _above(t[a, i], key[a, i], t[a, top[j - 1]], key[a, top[j - 1]]):
                    top[j] = top[j - 1]
                    j -= 1
                top[j] = i
                if m < k + 1:
                    m += 1
            thr = t[a, top[k]]
            for j in range(k):
                i = top[j]
                v = eta * (t[a, i] - thr)
                u[a, i] = 0.0 if v < 0.0 else (1.0 if v > 1.0 else v)
    return out


cdef inline bint _above(double ti, double ki, double tj, double kj) noexcept nogil:
    return ti > tj or (ti == tj and ki > kj)
