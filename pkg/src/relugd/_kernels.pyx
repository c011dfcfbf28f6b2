# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; operation-for-operation twins of ``_kernels_py``.

Accumulators are seeded with the first term (never with 0.0) so that signed
zeros and rounding match ``np.cumsum`` in the fallback exactly.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()

cdef double JACOBI_TOL = 1e-14
cdef int JACOBI_MAX_SWEEPS = 100


def preactivations(const double[:, ::1] W, const double[::1] B, const double[:, ::1] X):
    cdef Py_ssize_t width = W.shape[0], d = W.shape[1], m = X.shape[0]
    cdef Py_ssize_t k, j, ell
    cdef double acc
    out = np.empty((width, m))
    cdef double[:, ::1] Z = out
    for k in range(width):
        for j in range(m):
            acc = W[k, 0] * X[j, 0]
            for ell in range(1, d):
                acc = acc + W[k, ell] * X[j, ell]
            Z[k, j] = acc + B[k]
    return out


def forward(const double[:, ::1] Z, const double[::1] Wout, double bias):
    cdef Py_ssize_t width = Z.shape[0], m = Z.shape[1]
    cdef Py_ssize_t k, j
    cdef double acc, z
    out = np.empty(m)
    cdef double[::1] f = out
    for j in range(m):
        z = Z[0, j]
        acc = Wout[0] * (z if z > 0.0 else 0.0)
        for k in range(1, width):
            z = Z[k, j]
            acc = acc + Wout[k] * (z if z > 0.0 else 0.0)
        f[j] = acc + bias
    return out


def gradient(const double[:, ::1] Z, const double[::1] Wout, const double[::1] resid,
             const double[:, ::1] X):
    cdef Py_ssize_t width = Z.shape[0], m = Z.shape[1], d = X.shape[1]
    cdef Py_ssize_t k, j, ell
    cdef double scale = 2.0 / m
    cdef double c, accB, sb
    dW_arr = np.empty((width, d))
    dB_arr = np.empty(width)
    cdef double[:, ::1] dW = dW_arr
    cdef double[::1] dB = dB_arr
    cdef double[::1] accW = np.empty(d)
    for k in range(width):
        c = resid[0] * Wout[k] if Z[k, 0] >= 0.0 else 0.0
        for ell in range(d):
            accW[ell] = c * X[0, ell]
        accB = c
        for j in range(1, m):
            c = resid[j] * Wout[k] if Z[k, j] >= 0.0 else 0.0
            for ell in range(d):
                accW[ell] = accW[ell] + c * X[j, ell]
            accB = accB + c
        for ell in range(d):
            dW[k, ell] = scale * accW[ell]
        dB[k] = scale * accB
    sb = resid[0]
    for j in range(1, m):
        sb = sb + resid[j]
    return dW_arr, dB_arr, scale * sb


def gram(const double[:, ::1] Z, const double[::1] Wout):
    cdef Py_ssize_t width = Z.shape[0], m = Z.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc, w2
    out = np.empty((m, m))
    cdef double[:, ::1] G = out
    for i in range(m):
        for j in range(i, m):
            w2 = Wout[0] * Wout[0]
            acc = w2 if (Z[0, i] >= 0.0 and Z[0, j] >= 0.0) else 0.0
            for k in range(1, width):
                if Z[k, i] >= 0.0 and Z[k, j] >= 0.0:
                    acc = acc + Wout[k] * Wout[k]
                else:
                    acc = acc + 0.0
            G[i, j] = acc
            G[j, i] = acc
    return out


def drifts(const double[:, ::1] W, const double[:, ::1] W0, const double[::1] B,
           const double[::1] B0, double C):
    cdef Py_ssize_t width = W.shape[0], d = W.shape[1]
    cdef Py_ssize_t k, ell
    cdef double sq, diff, nw, ab, comb
    cdef double maxW = -1.0, maxB = -1.0, maxC = -1.0
    for k in range(width):
        diff = W[k, 0] - W0[k, 0]
        sq = diff * diff
        for ell in range(1, d):
            diff = W[k, ell] - W0[k, ell]
            sq = sq + diff * diff
        nw = sqrt(sq)
        ab = fabs(B[k] - B0[k])
        comb = C * nw + ab
        if nw > maxW:
            maxW = nw
        if ab > maxB:
            maxB = ab
        if comb > maxC:
            maxC = comb
    return maxW, maxB, maxC


def jacobi_eigenvalues(const double[:, :] A):
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t i, j, p, q, r, sweep
    cdef double frob = 0.0, tol, apq, app, aqq, theta, t, c, s, arp, arq, nrp, nrq
    cdef bint rotated
    buf = np.empty((n, n))
    cdef double[:, ::1] a = buf
    for i in range(n):
        for j in range(n):
            a[i, j] = A[i, j]
            frob = frob + a[i, j] * a[i, j]
    frob = sqrt(frob)
    tol = JACOBI_TOL * frob
    for sweep in range(JACOBI_MAX_SWEEPS):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if fabs(apq) <= tol:
                    continue
                rotated = True
                app = a[p, p]
                aqq = a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                if fabs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for r in range(n):
                    if r == p or r == q:
                        continue
                    arp = a[r, p]
                    arq = a[r, q]
                    nrp = c * arp - s * arq
                    nrq = s * arp + c * arq
                    a[r, p] = nrp
                    a[p, r] = nrp
                    a[r, q] = nrq
                    a[q, r] = nrq
        if not rotated:
            break
    return np.sort(np.array([a[i, i] for i in range(n)]))
