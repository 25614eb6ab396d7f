"""Independent reference computations used only by the tests."""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import optimize


def naive_matvec(a: np.ndarray, x) -> np.ndarray:
    n = a.shape[0]
    out = np.zeros(n)
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += a[i, j] * x[j]
        out[i] = s
    return out


def naive_quadratic_form(a: np.ndarray, x, y) -> float:
    n = a.shape[0]
    return math.fsum(x[i] * a[i, j] * y[j] for i in range(n) for j in range(n))


def charpoly(a: np.ndarray) -> np.ndarray:
    """Coefficients of det(xI - A), highest degree first (Faddeev-LeVerrier)."""
    n = a.shape[0]
    coeffs = [1.0]
    m = np.zeros_like(a)
    eye = np.eye(n)
    for k in range(1, n + 1):
        m = a @ m + coeffs[-1] * eye
        coeffs.append(-np.trace(a @ m) / k)
    return np.array(coeffs)


def _count_below(polys, x: float) -> int:
    """Eigenvalues of A below x, from sign changes of det((xI - A_k)) over k.

    The leading principal minors of xI - A are the characteristic
    polynomials of the leading submatrices; by Jacobi's rule the number of
    sign changes in (1, p_1(x), ..., p_n(x)) counts negative eigenvalues of
    A - xI, i.e. eigenvalues of A above x. We return n minus that.
    """
    signs = [1.0] + [float(np.polyval(p, x)) for p in polys]
    changes = sum(1 for s, t in zip(signs, signs[1:]) if s * t < 0)
    return len(polys) - changes


def bisection_eigenvalues(a: np.ndarray, tol: float = 1e-13) -> np.ndarray:
    """Eigenvalues of a small symmetric matrix, descending, by bisection on charpolys."""
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    polys = [charpoly(a[:k, :k]) for k in range(1, n + 1)]
    bound = float(np.max(np.sum(np.abs(a), axis=1))) + 1.0
    out = []
    for idx in range(n):
        # idx-th smallest: smallest x with count_below(x) > idx
        lo, hi = -bound, bound
        while hi - lo > tol * max(1.0, bound):
            mid = 0.5 * (lo + hi)
            if _count_below(polys, mid) > idx:
                hi = mid
            else:
                lo = mid
        out.append(0.5 * (lo + hi))
    return np.array(out[::-1])


def rademacher_exact_moments(n: int, powers=(2, 4)) -> dict[int, float]:
    """E[lambda1^k] over every +-1 symmetric matrix of order n (diagonal included)."""
    iu = np.triu_indices(n)
    m = len(iu[0])
    totals = {k: 0.0 for k in powers}
    for signs in itertools.product((-1.0, 1.0), repeat=m):
        a = np.zeros((n, n))
        a[iu] = signs
        a.T[iu] = signs
        vals = np.linalg.eigvalsh(a)
        lam = max(abs(vals[0]), abs(vals[-1]))
        for k in powers:
            totals[k] += lam**k
    return {k: v / 2**m for k, v in totals.items()}


def dual_convex_distance(patterns) -> float:
    """sup over unit alpha of min_rows <alpha, s>, via min ||b||^2 s.t. P b >= 1."""
    pats = np.asarray(patterns, dtype=np.float64)
    if np.any(pats.sum(axis=1) == 0):
        return 0.0
    m = pats.shape[1]
    b0 = np.ones(m)
    b0 /= float(np.min(pats @ b0))
    res = optimize.minimize(
        lambda b: b @ b,
        b0,
        jac=lambda b: 2 * b,
        constraints=[{"type": "ineq", "fun": lambda b: pats @ b - 1.0, "jac": lambda b: pats}],
        bounds=[(0, None)] * m,
        method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 500},
    )
    return 1.0 / math.sqrt(res.fun)


def brute_force_distance(x, members_points) -> float:
    """Convex distance by a dense grid over convex weights (two or three patterns)."""
    x = np.asarray(x)
    pats = np.unique(np.array([(np.asarray(y) != x).astype(float) for y in members_points]), axis=0)
    k = pats.shape[0]
    steps = 2000 if k <= 2 else 300
    best = math.inf
    for w in itertools.product(range(steps + 1), repeat=k - 1):
        if sum(w) > steps:
            continue
        lam = np.array([*w, steps - sum(w)]) / steps
        best = min(best, float(np.linalg.norm(lam @ pats)))
    return best
