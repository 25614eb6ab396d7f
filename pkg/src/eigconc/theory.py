"""Closed-form predictions and exact checks of the deterministic eigenvalue lemmas."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import stats

from .eigen import SpectralSummary, full_spectrum
from .linalg import SymmetricMatrix, helmert_reduce

__all__ = [
    "ChainCheck",
    "FkPrediction",
    "FormulaInapplicableError",
    "InternalInconsistencyError",
    "Lemma44Check",
    "Lemma45Check",
    "LemmaWitness",
    "MEDIAN_MEAN_GAP_BOUND",
    "MatrixAnalysis",
    "TailTemplate",
    "fk_chain_check",
    "fk_lambda1_expectation",
    "fk_lambda2_bound",
    "lemma44_check",
    "lemma45_check",
    "rowsum_statistic",
    "semicircle_cdf",
    "semicircle_ks",
    "semicircle_quantile",
    "talagrand_tail_template",
    "trace_moment_lower_bound",
]

# integral_0^inf 4 t exp(-t^2/32) dt
MEDIAN_MEAN_GAP_BOUND = 64.0


class FormulaInapplicableError(ValueError):
    pass


class InternalInconsistencyError(AssertionError):
    pass


def semicircle_cdf(x):
    """Semicircle distribution function on [-1, 1]; accepts scalars or arrays."""
    xa = np.clip(np.asarray(x, dtype=np.float64), -1.0, 1.0)
    out = (xa * np.sqrt(1.0 - xa * xa) + np.arcsin(xa)) / np.pi + 0.5
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def semicircle_quantile(q: float) -> float:
    from scipy.optimize import brentq

    if not 0.0 <= q <= 1.0:
        raise ValueError("quantile level must be in [0, 1]")
    if q in (0.0, 1.0):
        return 2.0 * q - 1.0
    return brentq(lambda x: semicircle_cdf(x) - q, -1.0, 1.0, xtol=1e-15, rtol=1e-15)


def semicircle_ks(eigenvalues, sigma: float, n: int | None = None) -> float:
    """Kolmogorov-Smirnov distance between eigenvalues / (2 sigma sqrt n) and W."""
    vals = np.asarray(eigenvalues, dtype=np.float64)
    if vals.size == 0:
        raise ValueError("no eigenvalues given")
    if n is None:
        n = vals.size
    if n != vals.size:
        raise ValueError(f"n = {n} but {vals.size} eigenvalues given")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    scaled = vals / (2.0 * sigma * math.sqrt(n))
    return float(stats.kstest(scaled, semicircle_cdf).statistic)


@dataclass(frozen=True)
class FkPrediction:
    n: int
    p: float
    nu: float
    sigma2: float


def fk_lambda1_expectation(pred: FkPrediction) -> float:
    """Leading-order E[lambda1] = (n-1)p + nu + sigma^2/p (the o(1) term is dropped)."""
    if pred.p <= 0:
        raise FormulaInapplicableError(
            "off-diagonal mean p must be positive; use fk_lambda2_bound for p = 0"
        )
    return (pred.n - 1) * pred.p + pred.nu + pred.sigma2 / pred.p


def fk_lambda2_bound(n: int, sigma: float, C: float = 1.0) -> float:
    """2 sigma sqrt(n) + C n^(1/3) ln n; with C = 0 only the leading term."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    return 2.0 * sigma * math.sqrt(n) + C * n ** (1.0 / 3.0) * math.log(n)


def trace_moment_lower_bound(n: int, k: int, sigma: float) -> float:
    """Lower bound on E[lambda1^k] from counting closed walks in E[tr A^k].

    (1/(k/2+1)) C(k, k/2) sigma^k (n-1)(n-2)...(n-k/2), with k/2 factors.
    """
    if k < 2 or k % 2:
        raise ValueError(f"k must be an even integer >= 2, got {k}")
    half = k // 2
    if half >= n:
        raise ValueError(f"need k/2 < n, got k = {k}, n = {n}")
    falling = math.prod(n - i for i in range(1, half + 1))
    return math.comb(k, half) / (half + 1) * sigma**k * falling


@dataclass(frozen=True)
class TailTemplate:
    upper_tail: float
    lower_tail: float
    median_mean_gap: float


def talagrand_tail_template(t: float) -> TailTemplate:
    """Explicit constants: P[lambda1 >= m + t], P[lambda1 <= m - t] <= 2 exp(-t^2/32)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    tail = 2.0 * math.exp(-t * t / 32.0)
    return TailTemplate(tail, tail, MEDIAN_MEAN_GAP_BOUND)


def rowsum_statistic(a: SymmetricMatrix, s: float) -> tuple[float, float]:
    """sum_i (row_i - s)^2, cross-checked against ||(A - sI) 1||^2.

    Returns both values; raises :class:`InternalInconsistencyError` if they
    disagree beyond 1e-10 relative.
    """
    dense = a.dense
    n = a.n
    rows = dense.sum(axis=1)
    direct = math.fsum((rows - s) ** 2)
    shifted = dense - s * np.eye(n)
    via_norm = float(np.dot(shifted @ np.ones(n), shifted @ np.ones(n)))
    floor = 1e-13 * n * (n * a.max_abs_entry() + abs(s)) ** 2
    if abs(direct - via_norm) > 1e-10 * max(abs(direct), abs(via_norm)) + floor:
        raise InternalInconsistencyError(
            f"row-sum statistic {direct!r} != ||(A - sI)1||^2 = {via_norm!r}"
        )
    return direct, via_norm


class MatrixAnalysis:
    """Spectral data of one matrix shared by the lemma checks."""

    def __init__(self, a: SymmetricMatrix, method: str = "auto") -> None:
        self.a = a
        self.method = method

    @cached_property
    def decomposition(self):
        return full_spectrum(self.a, want_vectors=True, method=self.method)

    @cached_property
    def reduced_eigenvalues(self) -> np.ndarray:
        return full_spectrum(helmert_reduce(self.a), method=self.method).eigenvalues

    @cached_property
    def summary(self) -> SpectralSummary:
        return SpectralSummary.from_eigenvalues(
            self.decomposition.eigenvalues, self.reduced_eigenvalues
        )

    @cached_property
    def leading(self):
        vals = self.decomposition.eigenvalues
        vecs = self.decomposition.eigenvectors
        if abs(vals[-1]) > abs(vals[0]):
            return vecs[:, -1], "delta_n"
        return vecs[:, 0], "delta1"

    @cached_property
    def tolerance(self) -> float:
        return 1e-8 * self.a.frobenius_norm

    def ones_alignment(self) -> tuple[float, float]:
        """(c1, a): c1 = <1, v1> minimizes ||1 - c v1||, and a is that minimum."""
        v1, _ = self.leading
        ones = np.ones(self.a.n)
        c1 = float(ones @ v1)
        a = float(np.linalg.norm(ones - c1 * v1))
        return c1, a


@dataclass(frozen=True)
class LemmaWitness:
    c1: float
    a: float
    s: float = math.nan
    X: float = math.nan
    t: float = math.nan
    epsilon: float = math.nan


@dataclass(frozen=True)
class Lemma44Check:
    applicable: bool
    holds: bool
    slack: float
    lhs: float
    rhs: float
    witness: LemmaWitness


def _as_analysis(a, analysis):
    if analysis is not None:
        return analysis
    return MatrixAnalysis(a)


def lemma44_check(a: SymmetricMatrix, analysis: MatrixAnalysis | None = None) -> Lemma44Check:
    """mu2 - lambda2 <= 2 a lambda2 / (sqrt n - a) + a^2 lambda1 / (sqrt n - a)^2.

    Here ``a = ||1 - c1 v1||`` with v1 the leading unit eigenvector. When
    c1 = 0 or a >= sqrt(n) the check is reported as not applicable.
    """
    an = _as_analysis(a, analysis)
    n = a.n
    c1, dist = an.ones_alignment()
    witness = LemmaWitness(c1=c1, a=dist)
    root = math.sqrt(n)
    summ = an.summary
    lhs = summ.mu2 - summ.lambda2
    if c1 == 0.0 or dist >= root:
        return Lemma44Check(False, True, math.nan, lhs, math.nan, witness)
    gap = root - dist
    rhs = 2.0 * dist * summ.lambda2 / gap + dist * dist * summ.lambda1 / (gap * gap)
    slack = rhs - lhs
    return Lemma44Check(True, slack >= -an.tolerance, slack, lhs, rhs, witness)


@dataclass(frozen=True)
class Lemma45Check:
    applicable: bool
    holds: bool
    lhs: float
    rhs: float
    witness: LemmaWitness


def lemma45_check(
    a: SymmetricMatrix, s: float, X: float, analysis: MatrixAnalysis | None = None
) -> Lemma45Check:
    """If lambda2 <= s/2 and the row-sum statistic is <= X then ||1 - c1 v1|| <= 2 sqrt(X)/s."""
    if s <= 0 or X < 0:
        raise ValueError("need s > 0 and X >= 0")
    an = _as_analysis(a, analysis)
    c1, dist = an.ones_alignment()
    rhs = 2.0 * math.sqrt(X) / s
    witness = LemmaWitness(c1=c1, a=dist, s=s, X=X)
    stat, _ = rowsum_statistic(a, s)
    applicable = an.summary.lambda2 <= s / 2.0 and stat <= X
    holds = (dist <= rhs + 1e-8) if applicable else True
    return Lemma45Check(applicable, holds, dist, rhs, witness)


@dataclass(frozen=True)
class ChainCheck:
    applicable: bool
    holds: bool
    epsilon: float
    lhs: float
    bound: float
    properties: tuple[bool, bool, bool]
    witness: LemmaWitness


def fk_chain_check(
    a: SymmetricMatrix, t: float, p: float, analysis: MatrixAnalysis | None = None
) -> ChainCheck:
    """mu2 - (1 + eps) lambda2 <= 9t/p for matrices with the three regularity properties.

    The properties are: row-sum statistic at s = np at most n^2 t,
    lambda2 <= np/2 and lambda1 <= 2np. Then a = 2 sqrt(t)/p and
    eps = 2a / (sqrt(n) - a). Any rescaling of t is left to the caller.
    """
    if not 0 < p <= 1:
        raise ValueError("need 0 < p <= 1")
    if t <= 0:
        raise ValueError("need t > 0")
    an = _as_analysis(a, analysis)
    n = a.n
    s = n * p
    X = n * n * t
    stat, _ = rowsum_statistic(a, s)
    summ = an.summary
    props = (stat <= X, summ.lambda2 <= s / 2.0, summ.lambda1 <= 2.0 * s)
    dist = 2.0 * math.sqrt(t) / p
    root = math.sqrt(n)
    bound = 9.0 * t / p
    c1, _ = an.ones_alignment()
    if dist >= root:
        w = LemmaWitness(c1=c1, a=dist, s=s, X=X, t=t)
        return ChainCheck(False, True, math.nan, math.nan, bound, props, w)
    eps = 2.0 * dist / (root - dist)
    lhs = summ.mu2 - (1.0 + eps) * summ.lambda2
    w = LemmaWitness(c1=c1, a=dist, s=s, X=X, t=t, epsilon=eps)
    applicable = all(props)
    holds = (lhs <= bound + an.tolerance) if applicable else True
    return ChainCheck(applicable, holds, eps, lhs, bound, props, w)
