"""Empirical Rademacher complexity of finite sets of vectors.

Convention: R(A) = E_sigma sup_{a in A} (1/n) sum_i sigma_i a_i, with the 1/n
normalisation everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .pwl import PiecewiseLinear1D
from .rng import Stream

EXACT_CUTOFF = 20
EXACT_SLACK = 1e-12
_BLOCK = 1 << 14


class DimensionError(ValueError):
    pass


class ExactCutoffError(ValueError):
    """Raised when exact enumeration is requested above the cutoff; use rad_mc."""


@dataclass(frozen=True)
class VectorSet:
    vectors: np.ndarray  # shape (members, dim)

    def __post_init__(self):
        arr = np.asarray(self.vectors, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"need at least one vector of length >= 1, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "vectors", arr)

    @classmethod
    def of(cls, rows: Sequence[Sequence[float]]) -> "VectorSet":
        rows = [list(r) for r in rows]
        if len({len(r) for r in rows}) > 1:
            raise DimensionError("member vectors have different lengths")
        return cls(np.array(rows, dtype=np.float64))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    def __len__(self):
        return self.size

    def __iter__(self):
        return iter(self.vectors)

    def scaled(self, lam: float) -> "VectorSet":
        return VectorSet(lam * self.vectors)

    def union(self, other: "VectorSet") -> "VectorSet":
        _same_dim(self, other)
        return VectorSet(np.vstack([self.vectors, other.vectors]))


@dataclass(frozen=True)
class CoordMapFamily:
    """n scalar maps applied coordinatewise, with declared Lipschitz constants."""

    maps: tuple[Callable, ...]
    lipschitz_constants: np.ndarray

    def __post_init__(self):
        lc = np.asarray(self.lipschitz_constants, dtype=np.float64).ravel()
        if len(self.maps) != lc.size:
            raise DimensionError("one Lipschitz constant per map")
        if np.any(lc < 0):
            raise ValueError("Lipschitz constants must be nonnegative")
        object.__setattr__(self, "maps", tuple(self.maps))
        object.__setattr__(self, "lipschitz_constants", lc)

    def __len__(self):
        return len(self.maps)

    @property
    def max_lipschitz(self) -> float:
        return float(self.lipschitz_constants.max())

    @classmethod
    def identity(cls, n: int) -> "CoordMapFamily":
        return cls(tuple(PiecewiseLinear1D.identity() for _ in range(n)), np.ones(n))

    @classmethod
    def random_pwl(cls, stream: Stream, n: int, max_lipschitz: float = 2.0) -> "CoordMapFamily":
        consts = stream.uniform(n, 0.0, max_lipschitz)
        maps = tuple(
            PiecewiseLinear1D.random(stream, float(L), max_breaks=5, through_origin=True)
            for L in consts
        )
        return cls(maps, consts)

    def with_constants(self, consts) -> "CoordMapFamily":
        return CoordMapFamily(self.maps, consts)

    def validate(self, probes: np.ndarray, slack: float = 1e-12) -> list[str]:
        """Check phi_i(0) = 0 and the declared Lipschitz bound on all probe pairs."""
        problems = []
        probes = np.asarray(probes, dtype=np.float64)
        for i, (phi, L) in enumerate(zip(self.maps, self.lipschitz_constants)):
            if abs(float(phi(0.0))) > slack:
                problems.append(f"map {i}: phi(0) = {float(phi(0.0))}")
            vals = np.asarray(phi(probes), dtype=np.float64)
            du = np.abs(probes[:, None] - probes[None, :])
            dv = np.abs(vals[:, None] - vals[None, :])
            if np.any(dv > L * du + slack):
                problems.append(f"map {i}: slope exceeds declared constant {L}")
        return problems


@dataclass(frozen=True)
class RadEstimate:
    value: float
    stderr: float = 0.0
    mode: str = "exact"
    draws: int = 0

    def __post_init__(self):
        if self.mode == "exact" and self.stderr != 0.0:
            raise ValueError("exact estimates carry no stderr")


def _same_dim(A: VectorSet, B: VectorSet):
    if A.dim != B.dim:
        raise DimensionError(f"dimension mismatch: {A.dim} vs {B.dim}")


def _sign_block(start: int, stop: int, n: int) -> np.ndarray:
    s = np.arange(start, stop, dtype=np.int64)[:, None]
    bits = (s >> np.arange(n, dtype=np.int64)) & 1
    return 2.0 * bits - 1.0


def _sup_correlations(signs: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    # accumulate coordinate by coordinate in fixed order, independent of BLAS threading
    acc = np.zeros((signs.shape[0], vectors.shape[0]))
    for i in range(vectors.shape[1]):
        acc += signs[:, i : i + 1] * vectors[None, :, i]
    return acc.max(axis=1) / vectors.shape[1]


def rad_exact(A: VectorSet, cutoff: int = EXACT_CUTOFF) -> RadEstimate:
    n = A.dim
    if n > cutoff:
        raise ExactCutoffError(f"dim {n} exceeds exact cutoff {cutoff}; use rad_mc")
    total = 1 << n
    partials = []
    for start in range(0, total, _BLOCK):
        stop = min(total, start + _BLOCK)
        partials.extend(_sup_correlations(_sign_block(start, stop, n), A.vectors).tolist())
    return RadEstimate(math.fsum(partials) / total, 0.0, "exact", 0)


def rad_mc(A: VectorSet, draws: int, seed: int) -> RadEstimate:
    if draws < 2:
        raise ValueError("need at least 2 draws")
    stream = Stream(seed)
    sups = np.empty(draws)
    for start in range(0, draws, _BLOCK):
        stop = min(draws, start + _BLOCK)
        sups[start:stop] = _sup_correlations(stream.signs(stop - start, A.dim), A.vectors)
    return RadEstimate(
        float(np.mean(sups)), float(np.std(sups, ddof=1) / math.sqrt(draws)), "monte_carlo", draws
    )


def rad(A: VectorSet, mode: str = "exact", draws: int = 100_000, seed: int = 0) -> RadEstimate:
    if mode == "exact":
        return rad_exact(A)
    if mode == "monte_carlo":
        return rad_mc(A, draws, seed)
    raise ValueError(f"unknown mode {mode!r}")


def combine(A: VectorSet, B: VectorSet, kind: str) -> VectorSet:
    _same_dim(A, B)
    a, b = A.vectors[:, None, :], B.vectors[None, :, :]
    if kind == "minkowski_sum":
        out = a + b
    elif kind == "minkowski_diff":
        out = a - b
    elif kind == "coord_max":
        out = np.maximum(a, b)
    else:
        raise ValueError(f"unknown combination {kind!r}")
    return VectorSet(out.reshape(-1, A.dim))


def transform(A: VectorSet, kind: str, c=None, maps: CoordMapFamily | None = None) -> VectorSet:
    if kind == "translate":
        c = np.asarray(c, dtype=np.float64).ravel()
        if c.size != A.dim:
            raise DimensionError(f"translation of length {c.size} on dim {A.dim}")
        return VectorSet(A.vectors + c)
    if kind == "abs":
        return VectorSet(np.abs(A.vectors))
    if kind == "coord_maps":
        if maps is None or len(maps) != A.dim:
            raise DimensionError("need one coordinate map per dimension")
        cols = [np.asarray(phi(A.vectors[:, i]), dtype=np.float64) for i, phi in enumerate(maps.maps)]
        return VectorSet(np.column_stack(cols))
    raise ValueError(f"unknown transform {kind!r}")


@dataclass
class Check:
    name: str
    lhs: float
    rhs: float
    relation: str  # "==" or "<="
    slack: float
    passed: bool = field(init=False)

    def __post_init__(self):
        if self.relation == "==":
            self.passed = bool(abs(self.lhs - self.rhs) <= self.slack)
        else:
            self.passed = bool(self.lhs <= self.rhs + self.slack)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "relation": self.relation,
            "slack": self.slack,
            "passed": self.passed,
        }


def verify_lemma_suite(
    A: VectorSet,
    B: VectorSet,
    maps: CoordMapFamily,
    mode: str = "exact",
    seed: int = 0,
    draws: int = 100_000,
    c=None,
) -> list[Check]:
    """Both sides of the six set-algebra inequalities for one (A, B, maps) instance.

    ``c`` is the translation vector for the invariance check; it defaults to
    the first member of B. In Monte-Carlo mode every estimate shares the seed
    (common random signs) and each check gets a slack of 3 combined stderrs.
    """
    _same_dim(A, B)
    if len(maps) != A.dim:
        raise DimensionError("need one coordinate map per dimension")
    if c is None:
        c = B.vectors[0]

    def R(S: VectorSet) -> RadEstimate:
        return rad(S, mode, draws, seed)

    rA, rB = R(A), R(B)
    rows = [
        ("translation_invariance", R(transform(A, "translate", c=c)), [rA], 1.0, "=="),
        ("subadditivity", R(combine(A, B, "minkowski_sum")), [rA, rB], 1.0, "<="),
        ("difference_bound", R(combine(A, B, "minkowski_diff")), [rA, rB], 1.0, "<="),
        ("contraction", R(transform(A, "coord_maps", maps=maps)), [rA], maps.max_lipschitz, "<="),
        ("abs_contraction", R(transform(A, "abs")), [rA], 1.0, "<="),
        ("coordinatewise_max", R(combine(A, B, "coord_max")), [rA, rB], 1.0, "<="),
    ]
    checks = []
    for name, lhs, rhs_terms, factor, relation in rows:
        rhs = factor * sum(t.value for t in rhs_terms)
        if mode == "exact":
            slack = EXACT_SLACK
        else:
            se2 = lhs.stderr**2 + sum((factor * t.stderr) ** 2 for t in rhs_terms)
            slack = 3.0 * math.sqrt(se2)
        checks.append(Check(name, lhs.value, rhs, relation, slack))
    return checks


def random_instance(
    stream: Stream, max_dim: int = 8, max_size: int = 8, max_lipschitz: float = 2.0
) -> tuple[VectorSet, VectorSet, CoordMapFamily]:
    n = 1 + stream.below(max_dim)
    A = VectorSet(stream.uniform((1 + stream.below(max_size), n), -1.0, 1.0))
    B = VectorSet(stream.uniform((1 + stream.below(max_size), n), -1.0, 1.0))
    return A, B, CoordMapFamily.random_pwl(stream, n, max_lipschitz)
