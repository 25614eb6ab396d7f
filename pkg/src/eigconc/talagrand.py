"""Talagrand's convex distance on small finite product spaces.

The convex distance from x to an event A is
``sup_{|alpha| = 1} min_{y in A} sum_{i: x_i != y_i} |alpha_i|``. Writing
``s(y)`` for the 0/1 pattern of coordinates where y differs from x, minimax
duality turns this into the Euclidean norm of the minimum-norm point of
``conv{s(y) : y in A}``, which is what :func:`convex_distance` computes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

__all__ = [
    "Enlargement",
    "InequalityCheck",
    "MAX_POINTS",
    "MinNormError",
    "PointSet",
    "ProductSpace",
    "convex_distance",
    "difference_patterns",
    "enlargement_measure",
    "exact_min_norm",
    "grid_sup_min",
    "min_norm_point",
    "point_distances",
    "verify_inequality",
]

MAX_POINTS = 10**6
ENUMERATION_LIMIT = 16
_TOL = 1e-12


class MinNormError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProductSpace:
    """Finite product of probability spaces; points are tuples of alphabet indices."""

    alphabets: tuple[tuple, ...]
    measures: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        if len(self.alphabets) != len(self.measures):
            raise ValueError("need one measure per coordinate")
        if not self.alphabets:
            raise ValueError("need at least one coordinate")
        for i, (alpha, mu) in enumerate(zip(self.alphabets, self.measures)):
            if len(alpha) != len(mu) or not alpha:
                raise ValueError(f"coordinate {i}: alphabet and measure sizes differ")
            if any(p < 0 for p in mu) or abs(math.fsum(mu) - 1.0) > 1e-12:
                raise ValueError(f"coordinate {i}: measure does not sum to 1")
        if self.size > MAX_POINTS:
            raise ValueError(f"space has {self.size} points, cap is {MAX_POINTS}")

    @classmethod
    def uniform(cls, sizes) -> "ProductSpace":
        sizes = tuple(int(k) for k in sizes)
        return cls(
            tuple(tuple(range(k)) for k in sizes),
            tuple(tuple([1.0 / k] * k) for k in sizes),
        )

    @classmethod
    def hypercube(cls, m: int) -> "ProductSpace":
        return cls.uniform([2] * m)

    @property
    def m(self) -> int:
        return len(self.alphabets)

    @property
    def size(self) -> int:
        return math.prod(len(a) for a in self.alphabets)

    @cached_property
    def points(self) -> np.ndarray:
        """All points in lexicographic order, as alphabet indices (size x m)."""
        grids = [range(len(a)) for a in self.alphabets]
        return np.array(list(itertools.product(*grids)), dtype=np.int64).reshape(
            self.size, self.m
        )

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.ones(self.size)
        for i, mu in enumerate(self.measures):
            w *= np.asarray(mu)[self.points[:, i]]
        return w

    def index_of(self, point) -> int:
        idx = 0
        for size, v in zip((len(a) for a in self.alphabets), point):
            idx = idx * size + int(v)
        return idx


@dataclass(frozen=True)
class PointSet:
    space: ProductSpace
    members: np.ndarray = field(repr=False)

    @classmethod
    def from_points(cls, space: ProductSpace, points) -> "PointSet":
        mask = np.zeros(space.size, dtype=bool)
        for p in points:
            if len(p) != space.m:
                raise ValueError(f"point {p!r} has wrong length")
            mask[space.index_of(p)] = True
        return cls(space, mask)

    @classmethod
    def from_predicate(cls, space: ProductSpace, equalities) -> "PointSet":
        """Points whose coordinate i equals value v for every (i, v) given."""
        mask = np.ones(space.size, dtype=bool)
        for i, v in equalities:
            mask &= space.points[:, i] == v
        return cls(space, mask)

    @property
    def probability(self) -> float:
        return float(self.space.weights[self.members].sum())

    @property
    def is_empty(self) -> bool:
        return not bool(self.members.any())

    def __contains__(self, point) -> bool:
        return bool(self.members[self.space.index_of(point)])


def difference_patterns(x, event: PointSet) -> np.ndarray:
    """Distinct 0/1 patterns s(y) (rows) over y in the event, sorted."""
    pts = event.space.points[event.members]
    diff = (pts != np.asarray(x)[None, :]).astype(np.float64)
    return np.unique(diff, axis=0)


def _affine_min(points: np.ndarray):
    """Barycentric weights of the min-norm point of aff(points), or None if degenerate."""
    k = points.shape[0]
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = points @ points.T
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    if np.linalg.matrix_rank(kkt) < k + 1:
        return None
    return np.linalg.solve(kkt, rhs)[:k]


def min_norm_point(points, tol: float = 1e-12, max_iter: int = 1000):
    """Wolfe's active-set method for the min-norm point of conv(points).

    Returns ``(point, weights)`` with ``weights`` the convex combination over
    the rows of ``points``. Raises :class:`MinNormError` if it stalls.
    """
    pts = np.asarray(points, dtype=np.float64)
    k = pts.shape[0]
    scale = max(1.0, float(np.max(np.sum(pts * pts, axis=1))))
    start = int(np.argmin(np.sum(pts * pts, axis=1)))
    active = [start]
    lam = np.array([1.0])
    x = pts[start].copy()
    for _ in range(max_iter):
        j = int(np.argmin(pts @ x))
        if x @ x - x @ pts[j] <= tol * scale or j in active:
            weights = np.zeros(k)
            weights[active] = lam
            return x, weights
        active.append(j)
        lam = np.append(lam, 0.0)
        while True:
            mu = _affine_min(pts[active])
            if mu is None:
                raise MinNormError("affinely dependent active set")
            if np.all(mu > tol):
                lam = mu
                x = mu @ pts[active]
                break
            neg = mu <= tol
            theta = min(1.0, float(np.min(lam[neg] / (lam[neg] - mu[neg]))))
            lam = (1.0 - theta) * lam + theta * mu
            keep = lam > tol
            active = [a for a, kp in zip(active, keep) if kp]
            lam = lam[keep]
            lam /= lam.sum()
            x = lam @ pts[active]
    raise MinNormError(f"no convergence in {max_iter} major iterations")


def exact_min_norm(points) -> float:
    """Min-norm over conv(points) by enumerating affinely independent subsets."""
    pts = np.asarray(points, dtype=np.float64)
    k, m = pts.shape
    best = math.inf
    for size in range(1, min(k, m + 1) + 1):
        for subset in itertools.combinations(range(k), size):
            mu = _affine_min(pts[list(subset)])
            if mu is None or np.any(mu < -1e-12):
                continue
            best = min(best, float(np.linalg.norm(mu @ pts[list(subset)])))
    return best


def convex_distance(x, event: PointSet) -> float:
    """Talagrand convex distance from point ``x`` to ``event``."""
    if event.is_empty:
        raise ValueError("convex distance to an empty set is undefined")
    pats = difference_patterns(x, event)
    if np.any(pats.sum(axis=1) == 0):
        return 0.0
    try:
        point, _ = min_norm_point(pats)
        value = float(np.linalg.norm(point))
        certified = float(np.min(pats @ point)) >= point @ point - 1e-9
    except MinNormError:
        value, certified = math.nan, False
    if not certified:
        if pats.shape[0] > ENUMERATION_LIMIT:
            raise MinNormError("min-norm solver failed and too many patterns to enumerate")
        value = exact_min_norm(pats)
    return value


def grid_sup_min(patterns, resolution: int = 40) -> float:
    """Lower estimate of sup over unit alpha >= 0 of min_rows <alpha, s>.

    Directions are the normalized points of a simplex lattice with the
    given resolution, so every estimate is at most the true value.
    """
    pats = np.asarray(patterns, dtype=np.float64)
    alphas = _grid_directions(resolution, pats.shape[1])
    return float(np.max(np.min(pats @ alphas.T, axis=0)))


@lru_cache(maxsize=32)
def _grid_directions(resolution: int, m: int) -> np.ndarray:
    comps = np.array(list(_compositions(resolution, m)), dtype=np.float64)
    comps = comps[np.any(comps > 0, axis=1)]
    return comps / np.linalg.norm(comps, axis=1, keepdims=True)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class Enlargement:
    t: float
    prob_event: float
    prob_outside: float


def point_distances(event: PointSet) -> np.ndarray:
    """Convex distance of every point of the space to ``event``, by point index."""
    space = event.space
    return np.array([convex_distance(p, event) for p in space.points])


def enlargement_measure(event: PointSet, t: float, distances=None) -> Enlargement:
    """Exact Pr[A] and Pr[complement of A_t], A_t = {x : d_T(x, A) <= t}."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if distances is None:
        distances = point_distances(event)
    outside = distances > t + _TOL
    w = event.space.weights
    return Enlargement(t, event.probability, float(w[outside].sum()))


@dataclass(frozen=True)
class InequalityCheck:
    max_ratio: float
    argmax_t: float
    ratios: tuple[float, ...]

    @property
    def holds(self) -> bool:
        return self.max_ratio <= 1.0 + 1e-9


def verify_inequality(event: PointSet, t_grid) -> InequalityCheck:
    """Worst ratio Pr[A] Pr[not A_t] / exp(-t^2/4) over ``t_grid``."""
    distances = point_distances(event)
    ratios = []
    for t in t_grid:
        e = enlargement_measure(event, float(t), distances)
        ratios.append(e.prob_event * e.prob_outside / math.exp(-t * t / 4.0))
    i = int(np.argmax(ratios))
    return InequalityCheck(float(ratios[i]), float(t_grid[i]), tuple(ratios))
