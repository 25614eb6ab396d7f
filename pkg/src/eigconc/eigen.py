"""Spectra of symmetric matrices and the extreme-eigenvalue functionals.

Notation follows the usual random-matrix conventions: ``delta1 >= ... >= delta_n``
are the eigenvalues, ``lambda1 = max(|delta1|, |delta_n|)`` and
``lambda2 = max(|delta2|, |delta_n|)``. ``mu2`` is the largest value of x^T A y
over unit x, y orthogonal to the all-ones vector, and ``mu2_prime`` the
largest x^T A x over the same set.
"""

from __future__ import annotations

import math

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .linalg import SymmetricMatrix, helmert_apply, helmert_apply_transpose, helmert_reduce

__all__ = [
    "ConvergenceError",
    "HelmertReducedOperator",
    "LanczosBreakdown",
    "LanczosResult",
    "QL_MAX_ORDER",
    "SpectralDecomposition",
    "SpectralSummary",
    "extreme_eigs_lanczos",
    "full_spectrum",
    "leading_eigenvector",
    "spectral_summary",
    "tridiagonal_eigenvalues",
]

# Orders above this use LAPACK under method="auto"; the compiled QL path is
# O(n^3) without blocking and falls well behind beyond a few hundred.
QL_MAX_ORDER = 256
_FLUSH = 2.0**-1000


class ConvergenceError(RuntimeError):
    """QL iteration exceeded its per-eigenvalue iteration cap."""

    def __init__(self, index: int, message: str | None = None) -> None:
        self.index = index
        super().__init__(
            message
            or f"QL iteration did not converge for eigenvalue {index} "
            f"within {_kernels.MAX_QL_ITERATIONS} iterations"
        )


class LanczosBreakdown(RuntimeError):
    """Lanczos kept producing zero vectors after the allowed restarts."""


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray | None = None  # column i pairs with eigenvalues[i]

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass(frozen=True)
class SpectralSummary:
    delta1: float
    delta2: float
    delta_n: float
    lambda1: float
    lambda2: float
    mu2: float
    mu2_prime: float

    @classmethod
    def from_eigenvalues(cls, desc: np.ndarray, reduced_desc: np.ndarray | None):
        d1, dn = float(desc[0]), float(desc[-1])
        d2 = float(desc[1]) if desc.shape[0] > 1 else d1
        if reduced_desc is None:
            mu2 = mu2p = float("nan")
        else:
            mu2 = float(max(abs(reduced_desc[0]), abs(reduced_desc[-1])))
            mu2p = float(reduced_desc[0])
        return cls(
            delta1=d1,
            delta2=d2,
            delta_n=dn,
            lambda1=max(abs(d1), abs(dn)),
            lambda2=max(abs(d2), abs(dn)),
            mu2=mu2,
            mu2_prime=mu2p,
        )

    def as_dict(self) -> dict[str, float]:
        return {
            "delta1": self.delta1,
            "delta2": self.delta2,
            "delta_n": self.delta_n,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "mu2": self.mu2,
            "mu2_prime": self.mu2_prime,
        }


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so each one's first non-negligible component is positive."""
    if vectors.size == 0:
        return vectors
    tol = 1e-10 * np.max(np.abs(vectors), axis=0)
    big = np.abs(vectors) > tol
    first = np.argmax(big, axis=0)
    signs = np.sign(vectors[first, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _resolve_method(method: str, n: int) -> str:
    if method == "auto":
        return "ql" if n <= QL_MAX_ORDER else "lapack"
    if method not in ("ql", "lapack"):
        raise ValueError(f"unknown eigensolver method {method!r}")
    return method


def full_spectrum(
    a: SymmetricMatrix, want_vectors: bool = False, method: str = "auto"
) -> SpectralDecomposition:
    """All eigenvalues (descending) and optionally orthonormal eigenvectors.

    ``method="ql"`` runs Householder tridiagonalization plus shifted implicit
    QL; ``"lapack"`` defers to ``numpy.linalg.eigh``. Ties in the eigenvalues
    keep the solver's original order.
    """
    dense = a.dense
    if not np.all(np.isfinite(dense)):
        raise ValueError("matrix has non-finite entries")
    n = a.n
    method = _resolve_method(method, n)

    if method == "ql":
        # exact power-of-two rescaling keeps subnormal or huge entries in range
        peak = float(np.max(np.abs(dense))) if n else 0.0
        shift = math.frexp(peak)[1] if peak > 0 else 0
        work = np.ascontiguousarray(np.ldexp(dense, -shift))
        # entries this small relative to the peak are far below rounding
        # level, and subnormal arithmetic would break the rotations
        work[np.abs(work) < _FLUSH] = 0.0
        d, e = _kernels.tridiagonalize(work, want_vectors)
        z = work if want_vectors else np.empty((0, n))
        failed = _kernels.tridiagonal_ql(d, e, z)
        if failed >= 0:
            raise ConvergenceError(failed)
        vals, vecs = np.ldexp(d, shift), (z if want_vectors else None)
    elif want_vectors:
        vals, vecs = np.linalg.eigh(dense)
    else:
        vals, vecs = np.linalg.eigvalsh(dense), None

    order = np.argsort(-vals, kind="stable")
    vals = np.ascontiguousarray(vals[order])
    if vecs is not None:
        vecs = _fix_signs(np.ascontiguousarray(vecs[:, order]))
    return SpectralDecomposition(vals, vecs)


def tridiagonal_eigenvalues(diag, offdiag, last_row: bool = False):
    """Eigenvalues (ascending) of a symmetric tridiagonal matrix.

    With ``last_row`` also return the last component of each normalized
    eigenvector, which is what Lanczos residual estimates need.
    """
    d = np.array(diag, dtype=np.float64)
    m = d.shape[0]
    e = np.zeros(m)
    e[: m - 1] = offdiag
    z = np.zeros((1, m)) if last_row else np.empty((0, m))
    if last_row:
        z[0, m - 1] = 1.0
    failed = _kernels.tridiagonal_ql(d, e, z)
    if failed >= 0:
        raise ConvergenceError(failed)
    order = np.argsort(d, kind="stable")
    if last_row:
        return d[order], z[0, order]
    return d[order]


class HelmertReducedOperator:
    """Matrix-free H^T A H, for Lanczos on the complement of the ones vector."""

    def __init__(self, a: SymmetricMatrix) -> None:
        self.a = a
        self.shape = (a.n - 1, a.n - 1)
        # ||H^T A H||_F <= ||A||_F; used only to scale tolerances
        self.frobenius_norm = a.frobenius_norm

    def matvec(self, y: np.ndarray) -> np.ndarray:
        return helmert_apply_transpose(self.a.dense @ helmert_apply(y))


@dataclass(frozen=True)
class LanczosResult:
    top: np.ndarray  # k largest Ritz values, descending
    bottom: np.ndarray  # k smallest Ritz values, ascending
    top_residuals: np.ndarray
    bottom_residuals: np.ndarray
    converged: bool
    iterations: int
    restarts: int


def _operator_parts(a):
    if isinstance(a, SymmetricMatrix):
        dense = a.dense
        return a.n, (lambda x: dense @ x), a.frobenius_norm
    n = a.shape[0]
    return n, a.matvec, getattr(a, "frobenius_norm", None)


def extreme_eigs_lanczos(
    a,
    k: int = 1,
    max_iter: int | None = None,
    tol: float | None = None,
    seed: int = 0,
    max_restarts: int = 3,
) -> LanczosResult:
    """Top and bottom ``k`` eigenvalues by Lanczos with full reorthogonalization.

    ``a`` is a :class:`SymmetricMatrix` or any object with ``shape`` and
    ``matvec``. Convergence means every returned Ritz value has residual bound
    ``beta_j * |s_last|`` at most ``tol`` (default ``1e-8 * ||A||_F`` when the
    Frobenius norm is known). A zero Lanczos vector triggers a restart from a
    fresh random vector orthogonal to the current basis.

    Lanczos resolves one copy of a repeated eigenvalue per Krylov block, so a
    multiple extreme eigenvalue may be reported once.
    """
    n, apply, fro = _operator_parts(a)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if max_iter is None:
        max_iter = min(n, max(300, 20 * k))
    max_iter = min(max_iter, n)
    if fro is not None and fro == 0.0:
        zeros = np.zeros(k)
        return LanczosResult(zeros, zeros.copy(), zeros.copy(), zeros.copy(), True, 0, 0)
    if tol is None:
        tol = 1e-8 * fro if fro is not None else 1e-10

    rng = np.random.default_rng(seed)
    q_basis = np.zeros((n, max_iter))
    alphas = np.zeros(max_iter)
    betas = np.zeros(max_iter)
    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    restarts = 0
    result = None

    for j in range(max_iter):
        m = j + 1
        q_basis[:, j] = q
        w = apply(q)
        alphas[j] = q @ w
        basis = q_basis[:, :m]
        for _ in range(2):
            w = w - basis @ (basis.T @ w)
        beta = float(np.linalg.norm(w))
        scale = max(float(np.max(np.abs(alphas[:m]))), float(np.max(betas[:m])), 1.0)
        breakdown = beta <= 1e-12 * scale
        if breakdown:
            beta = 0.0
        betas[j] = beta

        if m >= min(2 * k, n) or breakdown or m == max_iter:
            result = _ritz_result(alphas, betas, m, k, tol, restarts)
            if result.converged or m == n:
                return result
        if not breakdown:
            q = w / beta
            continue
        # Invariant subspace exhausted before k Ritz values exist on each
        # side: extend the basis from a fresh direction.
        restarts += 1
        if restarts > max_restarts:
            raise LanczosBreakdown(f"Lanczos broke down {restarts} times (last at step {m})")
        v = rng.standard_normal(n)
        for _ in range(2):
            v = v - basis @ (basis.T @ v)
        q = v / np.linalg.norm(v)
    return result


def _ritz_result(alphas, betas, m, k, tol, restarts) -> LanczosResult:
    theta, last = tridiagonal_eigenvalues(alphas[:m], betas[: m - 1], last_row=True)
    res = np.abs(betas[m - 1] * last)
    kk = min(k, m)
    top, top_res = theta[::-1][:kk], res[::-1][:kk]
    bottom, bottom_res = theta[:kk], res[:kk]
    ok = kk == k and bool(np.all(top_res <= tol) and np.all(bottom_res <= tol))
    return LanczosResult(top, bottom, top_res, bottom_res, ok, m, restarts)


def spectral_summary(
    a: SymmetricMatrix, method: str = "auto", with_mu2: bool = True,
    with_delta2: bool = True,
) -> SpectralSummary:
    """Extreme-eigenvalue functionals of ``a``.

    ``mu2`` and ``mu2_prime`` come from the spectrum of the Helmert-reduced
    matrix H^T A H; pass ``with_mu2=False`` to skip that second solve (the two
    fields are then NaN). ``with_delta2=False`` lets the Lanczos path stop
    once the two ends have converged; ``delta2`` and ``lambda2`` are then NaN.

    ``method`` is ``"ql"``, ``"lapack"``, ``"lanczos"`` or ``"auto"`` (compiled
    QL up to ``QL_MAX_ORDER``, Lanczos above). The Lanczos path falls back to
    a dense LAPACK solve whenever it fails to converge.
    """
    if a.n < 2:
        raise ValueError("spectral_summary needs order >= 2")
    if method == "auto":
        method = "ql" if a.n <= QL_MAX_ORDER else "lanczos"
    if method == "lanczos":
        return _lanczos_summary(a, with_mu2, with_delta2)
    vals = full_spectrum(a, method=method).eigenvalues
    reduced = None
    if with_mu2:
        reduced = full_spectrum(helmert_reduce(a), method=method).eigenvalues
    summary = SpectralSummary.from_eigenvalues(vals, reduced)
    if not with_delta2:
        summary = replace(summary, delta2=float("nan"), lambda2=float("nan"))
    return summary


def _lanczos_summary(a: SymmetricMatrix, with_mu2: bool, with_delta2: bool) -> SpectralSummary:
    k = 2 if a.n > 2 and with_delta2 else 1
    res = extreme_eigs_lanczos(a, k=k)
    if res.converged:
        vals = np.array([*res.top, res.bottom[0]])
        if k == 1:
            vals = np.array([res.top[0], np.nan, res.bottom[0]])
    else:
        vals = full_spectrum(a, method="lapack").eigenvalues
        if not with_delta2:
            vals = np.array([vals[0], np.nan, vals[-1]])
    reduced = None
    if with_mu2:
        red = extreme_eigs_lanczos(HelmertReducedOperator(a), k=1)
        if red.converged:
            reduced = np.array([red.top[0], red.bottom[0]])
        else:
            reduced = full_spectrum(helmert_reduce(a), method="lapack").eigenvalues
    return SpectralSummary.from_eigenvalues(vals, reduced)


def leading_eigenvector(a: SymmetricMatrix, method: str = "auto"):
    """Unit eigenvector for the eigenvalue of largest magnitude.

    Returns ``(vector, eigenvalue, side)`` with ``side`` either ``"delta1"`` or
    ``"delta_n"``; a tie ``|delta1| == |delta_n|`` goes to ``"delta1"``.
    """
    dec = full_spectrum(a, want_vectors=True, method=method)
    vals = dec.eigenvalues
    if abs(vals[-1]) > abs(vals[0]):
        return dec.eigenvectors[:, -1].copy(), float(vals[-1]), "delta_n"
    return dec.eigenvectors[:, 0].copy(), float(vals[0]), "delta1"
