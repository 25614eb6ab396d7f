"""Compiled inner loops for the dense symmetric eigensolver.

Householder reduction to tridiagonal form followed by implicit QL iterations
with a Wilkinson-type shift (the classical tred2/tql2 pair).
"""

import math

import numpy as np
from numba import njit

MAX_QL_ITERATIONS = 40


@njit(cache=True)
def tridiagonalize(v, want_vectors):
    """Reduce the symmetric matrix held in ``v`` (overwritten) to tridiagonal form.

    Returns ``(d, e)`` where ``e[i]`` couples rows ``i`` and ``i + 1`` and
    ``e[n - 1] == 0``. With ``want_vectors`` the orthogonal transform Q with
    A = Q T Q^T is left in ``v``.
    """
    n = v.shape[0]
    d = np.empty(n)
    e = np.zeros(n)
    for j in range(n):
        d[j] = v[n - 1, j]
    for i in range(n - 1, 0, -1):
        scale = 0.0
        h = 0.0
        for k in range(i):
            scale += abs(d[k])
        if scale == 0.0:
            e[i] = d[i - 1]
            for j in range(i):
                d[j] = v[i - 1, j]
                v[i, j] = 0.0
                v[j, i] = 0.0
        else:
            for k in range(i):
                d[k] /= scale
                h += d[k] * d[k]
            f = d[i - 1]
            g = math.sqrt(h)
            if f > 0:
                g = -g
            e[i] = scale * g
            h = h - f * g
            d[i - 1] = f - g
            for j in range(i):
                e[j] = 0.0
            for j in range(i):
                f = d[j]
                v[j, i] = f
                g = e[j] + v[j, j] * f
                for k in range(j + 1, i):
                    g += v[k, j] * d[k]
                    e[k] += v[k, j] * f
                e[j] = g
            f = 0.0
            for j in range(i):
                e[j] /= h
                f += e[j] * d[j]
            hh = f / (h + h)
            for j in range(i):
                e[j] -= hh * d[j]
            for j in range(i):
                f = d[j]
                g = e[j]
                for k in range(j, i):
                    v[k, j] -= f * e[k] + g * d[k]
                d[j] = v[i - 1, j]
                v[i, j] = 0.0
        d[i] = h

    if want_vectors:
        for i in range(n - 1):
            v[n - 1, i] = v[i, i]
            v[i, i] = 1.0
            h = d[i + 1]
            if h != 0.0:
                for k in range(i + 1):
                    d[k] = v[k, i + 1] / h
                for j in range(i + 1):
                    g = 0.0
                    for k in range(i + 1):
                        g += v[k, i + 1] * v[k, j]
                    for k in range(i + 1):
                        v[k, j] -= g * d[k]
            for k in range(i + 1):
                v[k, i + 1] = 0.0
        for j in range(n):
            d[j] = v[n - 1, j]
            v[n - 1, j] = 0.0
        v[n - 1, n - 1] = 1.0
    else:
        for j in range(n):
            d[j] = v[j, j]

    # shift sub-diagonal so that e[i] couples i and i+1
    for i in range(1, n):
        e[i - 1] = e[i]
    e[n - 1] = 0.0
    return d, e


@njit(cache=True)
def tridiagonal_ql(d, e, z):
    """Diagonalize the tridiagonal matrix (d, e) in place.

    Each Givens rotation is also applied to the columns of ``z`` (shape r x n);
    pass the Householder transform for full eigenvectors, a single row of the
    identity to track only that component, or an empty (0 x n) array for
    eigenvalues alone. Returns -1 on success, otherwise the index of the
    eigenvalue that failed to converge within ``MAX_QL_ITERATIONS``.
    """
    n = d.shape[0]
    r_rows = z.shape[0]
    f = 0.0
    eps = 2.0 ** -52
    # deflate against the norm of the whole matrix, so that a block of tiny
    # entries met first is not iterated in its own (possibly subnormal) scale
    tst1 = 0.0
    for i in range(n):
        tst1 = max(tst1, abs(d[i]) + abs(e[i]))
    for l in range(n):
        m = l
        while m < n - 1:
            if abs(e[m]) <= eps * tst1:
                break
            m += 1
        if m > l:
            it = 0
            while True:
                it += 1
                if it > MAX_QL_ITERATIONS:
                    return l
                g = d[l]
                p = (d[l + 1] - g) / (2.0 * e[l])
                r = math.hypot(p, 1.0)
                if p < 0:
                    r = -r
                d[l] = e[l] / (p + r)
                d[l + 1] = e[l] * (p + r)
                dl1 = d[l + 1]
                h = g - d[l]
                for i in range(l + 2, n):
                    d[i] -= h
                f += h

                p = d[m]
                c = 1.0
                c2 = c
                c3 = c
                el1 = e[l + 1]
                s = 0.0
                s2 = 0.0
                for i in range(m - 1, l - 1, -1):
                    c3 = c2
                    c2 = c
                    s2 = s
                    g = c * e[i]
                    h = c * p
                    r = math.hypot(p, e[i])
                    e[i + 1] = s * r
                    s = e[i] / r
                    c = p / r
                    p = c * d[i] - s * g
                    d[i + 1] = h + s * (c * g + s * d[i])
                    for k in range(r_rows):
                        h = z[k, i + 1]
                        z[k, i + 1] = s * z[k, i] + c * h
                        z[k, i] = c * z[k, i] - s * h
                p = -s * s2 * c3 * el1 * e[l] / dl1
                e[l] = s * p
                d[l] = c * p
                if abs(e[l]) <= eps * tst1:
                    break
        d[l] = d[l] + f
        e[l] = 0.0
    return -1
