# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: reflect-padded 2-D convolution and the SMO solver."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

cdef double TAU = 1e-12


cdef inline Py_ssize_t _reflect(Py_ssize_t i, Py_ssize_t n) nogil:
    cdef Py_ssize_t period, m
    if n == 1:
        return 0
    period = 2 * (n - 1)
    m = ((i % period) + period) % period
    if m >= n:
        return period - m
    return m


def reflect_index(Py_ssize_t i, Py_ssize_t n):
    return _reflect(i, n)


def convolve2d_reflect(plane, kernel):
    cdef double[:, ::1] src = np.ascontiguousarray(plane, dtype=np.float64)
    cdef double[:, ::1] ker = np.ascontiguousarray(kernel, dtype=np.float64)
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1], k = ker.shape[0]
    cdef Py_ssize_t c = k // 2
    out = np.zeros((h, w), dtype=np.float64)
    cdef double[:, ::1] dst = out
    # reflected source index for every padded row / column, computed once
    rows_arr = np.empty(h + k - 1, dtype=np.intp)
    cols_arr = np.empty(w + k - 1, dtype=np.intp)
    cdef Py_ssize_t[::1] rows = rows_arr
    cdef Py_ssize_t[::1] cols = cols_arr
    cdef Py_ssize_t i, j, a, b, ri
    cdef double acc, wgt
    with nogil:
        for i in range(h + k - 1):
            rows[i] = _reflect(i - c, h)
        for j in range(w + k - 1):
            cols[j] = _reflect(j - c, w)
        # true convolution: weight (a, b) meets padded offset (k-1-a, k-1-b)
        for a in range(k):
            for b in range(k):
                wgt = ker[a, b]
                if wgt == 0.0:
                    continue
                for i in range(h):
                    ri = rows[i + k - 1 - a]
                    for j in range(w):
                        dst[i, j] += wgt * src[ri, cols[j + k - 1 - b]]
    return out


def smo_solve(K, y, double C, double tol=1e-3, long max_iter=1000000):
    """Solve the C-SVC dual on a precomputed kernel matrix.

    Returns ``(alpha, rho, n_iter)``; the decision function is
    ``sum(alpha * y * K[:, x]) - rho``.
    """
    cdef double[:, ::1] Km = np.ascontiguousarray(K, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0]
    alpha_arr = np.zeros(n, dtype=np.float64)
    grad_arr = -np.ones(n, dtype=np.float64)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] grad = grad_arr
    cdef Py_ssize_t t, i, j
    cdef long it = 0
    cdef double gmax, gmin, yg, b, a, obj, best
    cdef double qii, qjj, qij, quad, delta, diff, total, old_ai, old_aj, dai, daj
    cdef bint up, low
    with nogil:
        while it < max_iter:
            gmax = -INFINITY
            i = -1
            for t in range(n):
                up = (yv[t] > 0 and alpha[t] < C) or (yv[t] < 0 and alpha[t] > 0)
                if up:
                    yg = -yv[t] * grad[t]
                    if yg > gmax:
                        gmax = yg
                        i = t
            if i < 0:
                break
            gmin = INFINITY
            j = -1
            best = INFINITY
            for t in range(n):
                low = (yv[t] > 0 and alpha[t] > 0) or (yv[t] < 0 and alpha[t] < C)
                if not low:
                    continue
                yg = -yv[t] * grad[t]
                if yg < gmin:
                    gmin = yg
                b = gmax - yg
                if b > 0:
                    a = Km[i, i] + Km[t, t] - 2.0 * Km[i, t]
                    if a <= 0:
                        a = TAU
                    obj = -(b * b) / a
                    if obj < best:
                        best = obj
                        j = t
            if gmax - gmin < tol or j < 0:
                break
            it += 1
            old_ai = alpha[i]
            old_aj = alpha[j]
            qii = Km[i, i]
            qjj = Km[j, j]
            qij = yv[i] * yv[j] * Km[i, j]
            if yv[i] != yv[j]:
                quad = qii + qjj + 2.0 * qij
                if quad <= 0:
                    quad = TAU
                delta = (-grad[i] - grad[j]) / quad
                diff = alpha[i] - alpha[j]
                alpha[i] += delta
                alpha[j] += delta
                if diff > 0:
                    if alpha[j] < 0:
                        alpha[j] = 0.0
                        alpha[i] = diff
                else:
                    if alpha[i] < 0:
                        alpha[i] = 0.0
                        alpha[j] = -diff
                if diff > 0:
                    if alpha[i] > C:
                        alpha[i] = C
                        alpha[j] = C - diff
                else:
                    if alpha[j] > C:
                        alpha[j] = C
                        alpha[i] = C + diff
            else:
                quad = qii + qjj - 2.0 * qij
                if quad <= 0:
                    quad = TAU
                delta = (grad[i] - grad[j]) / quad
                total = alpha[i] + alpha[j]
                alpha[i] -= delta
                alpha[j] += delta
                if total > C:
                    if alpha[i] > C:
                        alpha[i] = C
                        alpha[j] = total - C
                else:
                    if alpha[j] < 0:
                        alpha[j] = 0.0
                        alpha[i] = total
                if total > C:
                    if alpha[j] > C:
                        alpha[j] = C
                        alpha[i] = total - C
                else:
                    if alpha[i] < 0:
                        alpha[i] = 0.0
                        alpha[j] = total
            dai = (alpha[i] - old_ai) * yv[i]
            daj = (alpha[j] - old_aj) * yv[j]
            for t in range(n):
                grad[t] += yv[t] * (Km[t, i] * dai + Km[t, j] * daj)
    return alpha_arr, _rho(alpha, grad, yv, C), it


cdef double _rho(double[::1] alpha, double[::1] grad, double[::1] y, double C):
    cdef double ub = INFINITY, lb = -INFINITY, total = 0.0, yg
    cdef Py_ssize_t t, nfree = 0
    for t in range(y.shape[0]):
        yg = y[t] * grad[t]
        if alpha[t] >= C:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            nfree += 1
            total += yg
    if nfree > 0:
        return total / nfree
    return (ub + lb) / 2.0
