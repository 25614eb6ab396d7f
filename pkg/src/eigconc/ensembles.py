"""Bounded-entry random symmetric matrix ensembles.

Every entry is a pure function of ``(master_seed, trial_index, i, j)``: the pair
``(master_seed, trial_index)`` keys a Philox counter-based generator and entry
(i, j) with i <= j reads the uniform at stream position ``j(j+1)/2 + i``,
which is then pushed through the entry distribution's inverse CDF. The
position does not depend on n, on the sampling order, or on which thread
draws the matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import SymmetricMatrix

__all__ = [
    "EnsembleSpec",
    "EntryDistribution",
    "InvalidSpecError",
    "PRESETS",
    "bernoulli",
    "empirical_moments",
    "entry_uniforms",
    "make_preset",
    "rademacher",
    "sample_matrix",
    "scaled_uniform",
    "shifted_two_point",
    "sparse_gnp",
    "validate",
]

MOMENT_TOL = 1e-12
SEED_LIMIT = 2**64


class InvalidSpecError(ValueError):
    def __init__(self, violations: list[str]) -> None:
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class EntryDistribution:
    """Either finitely many atoms ``(value, probability)`` or a uniform on [lo, hi]."""

    kind: str
    atoms: tuple[tuple[float, float], ...] = ()
    lo: float = 0.0
    hi: float = 0.0
    declared_mean: float | None = None
    declared_variance: float | None = None

    @classmethod
    def from_atoms(cls, atoms, mean=None, variance=None) -> "EntryDistribution":
        atoms = tuple((float(v), float(p)) for v, p in atoms)
        return cls("atoms", atoms=atoms, declared_mean=mean, declared_variance=variance)

    @classmethod
    def uniform(cls, lo: float, hi: float, mean=None, variance=None) -> "EntryDistribution":
        return cls("uniform", lo=float(lo), hi=float(hi), declared_mean=mean,
                   declared_variance=variance)

    @classmethod
    def constant(cls, value: float) -> "EntryDistribution":
        return cls.from_atoms([(value, 1.0)])

    @property
    def mean(self) -> float:
        if self.kind == "uniform":
            return 0.5 * (self.lo + self.hi)
        return math.fsum(v * p for v, p in self.atoms)

    @property
    def variance(self) -> float:
        if self.kind == "uniform":
            return (self.hi - self.lo) ** 2 / 12.0
        mu = self.mean
        return math.fsum(p * (v - mu) ** 2 for v, p in self.atoms)

    def inverse_cdf(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if self.kind == "uniform":
            return self.lo + (self.hi - self.lo) * u
        values = np.array([v for v, _ in self.atoms])
        cum = np.cumsum([p for _, p in self.atoms])
        cum[-1] = 1.0
        idx = np.searchsorted(cum, u, side="right")
        return values[np.minimum(idx, len(values) - 1)]

    def to_config(self) -> str:
        if self.kind == "uniform":
            return f"uniform:{self.lo!r},{self.hi!r}"
        return ",".join(f"{v!r}:{p!r}" for v, p in self.atoms)


def validate(dist: EntryDistribution) -> list[str]:
    """Every violated constraint of ``dist``; an empty list means valid."""
    problems = []
    if dist.kind == "atoms":
        if not dist.atoms:
            problems.append("atom list is empty")
        for v, p in dist.atoms:
            if not (math.isfinite(v) and -1.0 <= v <= 1.0):
                problems.append(f"value {v!r} not in [-1, 1]")
            if not (math.isfinite(p) and 0.0 <= p <= 1.0):
                problems.append(f"probability {p!r} not in [0, 1]")
        total = math.fsum(p for _, p in dist.atoms)
        if dist.atoms and abs(total - 1.0) > MOMENT_TOL:
            problems.append(f"probabilities sum to {total!r}, not 1")
    elif dist.kind == "uniform":
        for name, v in (("lo", dist.lo), ("hi", dist.hi)):
            if not (math.isfinite(v) and -1.0 <= v <= 1.0):
                problems.append(f"uniform {name} = {v!r} not in [-1, 1]")
        if dist.lo > dist.hi:
            problems.append(f"uniform lo {dist.lo!r} > hi {dist.hi!r}")
    else:
        problems.append(f"unknown distribution kind {dist.kind!r}")
        return problems
    if problems:
        return problems
    if dist.declared_mean is not None and abs(dist.declared_mean - dist.mean) > MOMENT_TOL:
        problems.append(
            f"declared mean {dist.declared_mean!r} != analytic mean {dist.mean!r}"
        )
    if (
        dist.declared_variance is not None
        and abs(dist.declared_variance - dist.variance) > MOMENT_TOL
    ):
        problems.append(
            f"declared variance {dist.declared_variance!r} != analytic variance "
            f"{dist.variance!r}"
        )
    return problems


@dataclass(frozen=True)
class EnsembleSpec:
    n: int
    offdiag: EntryDistribution
    diag: EntryDistribution
    master_seed: int = 0
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def violations(self) -> list[str]:
        problems = []
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            problems.append(f"n must be an integer >= 2, got {self.n!r}")
        if not (0 <= int(self.master_seed) < SEED_LIMIT):
            problems.append(f"seed {self.master_seed!r} is not an unsigned 64-bit integer")
        problems += [f"offdiag: {p}" for p in validate(self.offdiag)]
        problems += [f"diag: {p}" for p in validate(self.diag)]
        return problems

    def check(self) -> "EnsembleSpec":
        problems = self.violations()
        if problems:
            raise InvalidSpecError(problems)
        return self

    def with_seed(self, seed: int) -> "EnsembleSpec":
        return EnsembleSpec(self.n, self.offdiag, self.diag, int(seed), self.name, self.params)

    def with_n(self, n: int) -> "EnsembleSpec":
        return EnsembleSpec(int(n), self.offdiag, self.diag, self.master_seed, self.name,
                            self.params)

    @property
    def p(self) -> float:
        """Common mean of the off-diagonal entries."""
        return self.offdiag.mean

    @property
    def nu(self) -> float:
        return self.diag.mean

    @property
    def sigma2(self) -> float:
        return self.offdiag.variance


def _check_prob(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise InvalidSpecError([f"p out of range [0,1]: {p!r}"])
    return p


def bernoulli(n: int, p: float, seed: int = 0) -> EnsembleSpec:
    """Adjacency matrix of G(n, p): off-diagonal Bernoulli(p), zero diagonal."""
    p = _check_prob(p)
    off = EntryDistribution.from_atoms([(1.0, p), (0.0, 1.0 - p)])
    return EnsembleSpec(n, off, EntryDistribution.constant(0.0), seed, "bernoulli", {"p": p})


def shifted_two_point(n: int, p: float, seed: int = 0) -> EnsembleSpec:
    """Entries 1 w.p. p and -p/q w.p. q = 1-p, diagonal included (mean zero)."""
    p = _check_prob(p)
    if p > 0.5:
        raise InvalidSpecError([f"shifted_two_point needs p <= 1/2 so that -p/(1-p) >= -1, got {p!r}"])
    q = 1.0 - p
    dist = EntryDistribution.from_atoms([(1.0, p), (-p / q, q)])
    return EnsembleSpec(n, dist, dist, seed, "shifted_two_point", {"p": p})


def rademacher(n: int, seed: int = 0) -> EnsembleSpec:
    dist = EntryDistribution.from_atoms([(1.0, 0.5), (-1.0, 0.5)])
    return EnsembleSpec(n, dist, dist, seed, "rademacher", {})


def scaled_uniform(n: int, sigma: float, seed: int = 0) -> EnsembleSpec:
    """Mean-zero uniform entries with standard deviation ``sigma`` (<= 1/sqrt 3)."""
    half = math.sqrt(3.0) * float(sigma)
    if sigma < 0 or half > 1.0:
        raise InvalidSpecError([f"sigma out of range [0, 1/sqrt(3)]: {sigma!r}"])
    dist = EntryDistribution.uniform(-half, half)
    return EnsembleSpec(n, dist, dist, seed, "scaled_uniform", {"sigma": float(sigma)})


def sparse_gnp(n: int, c: float, seed: int = 0) -> EnsembleSpec:
    """G(n, p) with p = c log(n) / n, a p = omega(1/n) setting for lambda2 experiments."""
    p = min(1.0, float(c) * math.log(n) / n)
    spec = bernoulli(n, p, seed)
    return EnsembleSpec(n, spec.offdiag, spec.diag, seed, "sparse_gnp", {"c": float(c), "p": p})


PRESETS = {
    "bernoulli": (bernoulli, ("p",)),
    "shifted_two_point": (shifted_two_point, ("p",)),
    "rademacher": (rademacher, ()),
    "scaled_uniform": (scaled_uniform, ("sigma",)),
    "sparse_gnp": (sparse_gnp, ("c",)),
}


def make_preset(name: str, n: int, seed: int = 0, **params) -> EnsembleSpec:
    try:
        builder, needed = PRESETS[name]
    except KeyError:
        raise InvalidSpecError([f"unknown preset {name!r}"]) from None
    missing = [k for k in needed if k not in params]
    if missing:
        raise InvalidSpecError([f"preset {name!r} needs parameter {k!r}" for k in missing])
    return builder(n, *(params[k] for k in needed), seed=seed)


def entry_uniforms(master_seed: int, trial_index: int, count: int) -> np.ndarray:
    """First ``count`` uniforms of the stream keyed by (master_seed, trial_index)."""
    key = np.array([int(master_seed) % SEED_LIMIT, int(trial_index) % SEED_LIMIT],
                   dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.random(count)


def sample_matrix(spec: EnsembleSpec, trial_index: int, check_bounds: bool = False
                  ) -> SymmetricMatrix:
    spec.check()
    n = int(spec.n)
    rows, cols = np.triu_indices(n)
    u = entry_uniforms(spec.master_seed, trial_index, n * (n + 1) // 2)
    # storage is row-major upper, the stream is indexed by j(j+1)/2 + i
    u = u[cols * (cols + 1) // 2 + rows]
    on_diag = rows == cols
    values = np.empty_like(u)
    values[~on_diag] = spec.offdiag.inverse_cdf(u[~on_diag])
    values[on_diag] = spec.diag.inverse_cdf(u[on_diag])
    if check_bounds and np.any(np.abs(values) > 1.0):
        raise AssertionError("sampled entry outside [-1, 1]")
    return SymmetricMatrix(n, values)


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    variance: float
    mean_se: float
    variance_se: float
    count: int


def empirical_moments(spec: EnsembleSpec, trials: int) -> MomentEstimate:
    """Pooled mean and variance of off-diagonal entries over ``trials`` samples."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    chunks = []
    iu = np.triu_indices(spec.n, 1)
    for t in range(trials):
        a = sample_matrix(spec, t)
        chunks.append(a.dense[iu])
    x = np.concatenate(chunks)
    m = x.shape[0]
    mean = float(np.mean(x))
    var = float(np.mean((x - mean) ** 2))
    m4 = float(np.mean((x - mean) ** 4))
    mean_se = math.sqrt(var / m)
    var_se = math.sqrt(max(m4 - var * var, 0.0) / m)
    return MomentEstimate(mean, var, mean_se, var_se, m)
