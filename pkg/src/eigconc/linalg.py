"""Packed symmetric matrices and the vector primitives built on them.

Vectors are plain 1-D float64 numpy arrays. A :class:`SymmetricMatrix` keeps a
single copy of every unordered pair (i, j) in row-major upper-triangle order,
so symmetry holds by construction.
"""

from __future__ import annotations

from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = [
    "DimensionError",
    "SymmetricMatrix",
    "as_vector",
    "helmert_apply",
    "helmert_apply_transpose",
    "helmert_basis",
    "helmert_reduce",
    "matvec",
    "quadratic_form",
    "read_matrix_text",
    "row_sums",
    "matrix_text",
    "write_matrix_text",
]


class DimensionError(ValueError):
    """Raised when operand shapes do not agree."""


def as_vector(x, n: int | None = None) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise DimensionError(f"vector length {v.shape[0]} != matrix order {n}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def _packed_index(n: int, i: int, j: int) -> int:
    if i > j:
        i, j = j, i
    return i * n - i * (i - 1) // 2 + (j - i)


class SymmetricMatrix:
    """Real symmetric matrix of order n stored as its packed upper triangle.

    Instances are immutable: the packed buffer is read-only and
    :meth:`with_entry` returns a modified copy.
    """

    def __init__(self, n: int, packed) -> None:
        n = int(n)
        if n < 1:
            raise DimensionError(f"order must be positive, got {n}")
        data = np.array(packed, dtype=np.float64).ravel()
        if data.shape[0] != n * (n + 1) // 2:
            raise DimensionError(
                f"packed length {data.shape[0]} != n(n+1)/2 = {n * (n + 1) // 2}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("matrix has non-finite entries")
        data.flags.writeable = False
        self.n = n
        self.packed = data

    @classmethod
    def from_dense(cls, a, *, check_symmetric: bool = True) -> "SymmetricMatrix":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {a.shape}")
        if check_symmetric and not np.array_equal(a, a.T):
            raise ValueError("matrix is not symmetric")
        n = a.shape[0]
        return cls(n, a[np.triu_indices(n)])

    @classmethod
    def identity(cls, n: int) -> "SymmetricMatrix":
        return cls.from_dense(np.eye(n))

    @classmethod
    def ones(cls, n: int) -> "SymmetricMatrix":
        return cls(n, np.ones(n * (n + 1) // 2))

    @classmethod
    def diag(cls, values) -> "SymmetricMatrix":
        return cls.from_dense(np.diag(np.asarray(values, dtype=np.float64)))

    def __getitem__(self, ij) -> float:
        i, j = ij
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError(f"index {(i, j)} out of range for order {self.n}")
        return float(self.packed[_packed_index(self.n, i, j)])

    def with_entry(self, i: int, j: int, value: float) -> "SymmetricMatrix":
        """Copy of this matrix with entries (i, j) and (j, i) set to ``value``."""
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError(f"index {(i, j)} out of range for order {self.n}")
        data = self.packed.copy()
        data[_packed_index(self.n, i, j)] = value
        return SymmetricMatrix(self.n, data)

    @cached_property
    def dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        iu = np.triu_indices(self.n)
        a[iu] = self.packed
        a.T[iu] = self.packed
        a.flags.writeable = False
        return a

    def to_dense(self) -> np.ndarray:
        return self.dense.copy()

    @cached_property
    def frobenius_norm(self) -> float:
        # scale first so tiny or huge entries do not underflow/overflow when squared
        peak = self.max_abs_entry() if self.packed.size else 0.0
        if peak == 0.0 or not np.isfinite(peak):
            return peak
        return peak * float(np.linalg.norm(self.dense / peak))

    def trace(self) -> float:
        return float(np.trace(self.dense))

    def max_abs_entry(self) -> float:
        return float(np.max(np.abs(self.packed)))

    def __sub__(self, other: "SymmetricMatrix") -> "SymmetricMatrix":
        if not isinstance(other, SymmetricMatrix):
            return NotImplemented
        if other.n != self.n:
            raise DimensionError(f"orders differ: {self.n} vs {other.n}")
        return SymmetricMatrix(self.n, self.packed - other.packed)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SymmetricMatrix):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.packed, other.packed)

    __hash__ = None

    def __repr__(self) -> str:
        return f"SymmetricMatrix(n={self.n})"


def matvec(a: SymmetricMatrix, x) -> np.ndarray:
    return a.dense @ as_vector(x, a.n)


def quadratic_form(a: SymmetricMatrix, x, y) -> float:
    """Bilinear form x^T A y."""
    x = as_vector(x, a.n)
    y = as_vector(y, a.n)
    return float(x @ (a.dense @ y))


def row_sums(a: SymmetricMatrix) -> np.ndarray:
    return a.dense.sum(axis=1)


# Helmert basis: column k-1 (k = 1..n-1) is (1,...,1,-k,0,...,0)/sqrt(k(k+1))
# with k leading ones. It spans the hyperplane orthogonal to the all-ones vector.


def _helmert_scale(n: int) -> np.ndarray:
    k = np.arange(1, n, dtype=np.float64)
    return 1.0 / np.sqrt(k * (k + 1.0))


def helmert_basis(n: int) -> np.ndarray:
    """Dense n x (n-1) matrix whose columns are the Helmert vectors."""
    if n < 2:
        raise DimensionError("the Helmert basis needs n >= 2")
    h = np.triu(np.ones((n, n - 1)))
    k = np.arange(1, n)
    h[k, k - 1] = -k
    return h * _helmert_scale(n)


def helmert_apply_transpose(x: np.ndarray, axis: int = 0) -> np.ndarray:
    """Compute H^T x along ``axis`` in O(n) per fibre."""
    x = np.moveaxis(np.asarray(x, dtype=np.float64), axis, 0)
    n = x.shape[0]
    if n < 2:
        raise DimensionError("the Helmert basis needs n >= 2")
    head = np.cumsum(x[:-1], axis=0)
    k = np.arange(1, n, dtype=np.float64).reshape((-1,) + (1,) * (x.ndim - 1))
    scale = _helmert_scale(n).reshape(k.shape)
    out = (head - k * x[1:]) * scale
    return np.moveaxis(out, 0, axis)


def helmert_apply(y: np.ndarray, axis: int = 0) -> np.ndarray:
    """Compute H y along ``axis``; ``y`` has length n-1 there, the result n."""
    y = np.moveaxis(np.asarray(y, dtype=np.float64), axis, 0)
    n = y.shape[0] + 1
    shape = (-1,) + (1,) * (y.ndim - 1)
    w = y * _helmert_scale(n).reshape(shape)
    # x_i = sum_{k > i} w_k - i * w_i  (w_0 := 0)
    tail = np.zeros((n,) + y.shape[1:])
    tail[:-1] = np.cumsum(w[::-1], axis=0)[::-1]
    out = tail
    out[1:] -= np.arange(1, n, dtype=np.float64).reshape(shape) * w
    return np.moveaxis(out, 0, axis)


def helmert_reduce(a: SymmetricMatrix) -> SymmetricMatrix:
    """Return H^T A H, the restriction of A to the complement of the ones vector."""
    if a.n < 2:
        raise DimensionError("helmert_reduce needs order >= 2")
    b = helmert_apply_transpose(helmert_apply_transpose(a.dense, axis=0), axis=1)
    # H^T A H is symmetric in exact arithmetic; average away rounding asymmetry.
    b = 0.5 * (b + b.T)
    return SymmetricMatrix.from_dense(b, check_symmetric=False)


def matrix_text(a: SymmetricMatrix) -> str:
    """``n`` on the first line, then the packed upper triangle row by row."""
    lines = [str(a.n)]
    start = 0
    for i in range(a.n):
        stop = start + a.n - i
        lines.append(" ".join(repr(float(v)) for v in a.packed[start:stop]))
        start = stop
    return "\n".join(lines) + "\n"


def write_matrix_text(a: SymmetricMatrix, path) -> None:
    Path(path).write_text(matrix_text(a))


def read_matrix_text(path) -> SymmetricMatrix:
    tokens = Path(path).read_text().split()
    if not tokens:
        raise ValueError(f"{path}: empty matrix file")
    n = int(tokens[0])
    values = [float(t) for t in tokens[1:]]
    return SymmetricMatrix(n, values)
