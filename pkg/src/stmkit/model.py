"""Domain types for the topic model Pi = A W and exact population moments.

Index conventions: words are rows (0-based), topics are columns of A, documents
are columns of W and of the count matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

COLSUM_TOL = 1e-12


class ModelError(ValueError):
    """Raised on malformed model inputs (shapes, negative entries, bad partitions)."""


def _as_stochastic(entries, name):
    arr = np.array(entries, dtype=float)
    if arr.ndim != 2:
        raise ModelError(f"{name} must be a 2-d matrix, got shape {arr.shape}")
    if np.any(arr < 0):
        raise ModelError(f"{name} has negative entries")
    sums = arr.sum(axis=0)
    bad = np.flatnonzero(np.abs(sums - 1.0) > COLSUM_TOL)
    if bad.size:
        raise ModelError(f"{name} columns {bad.tolist()} do not sum to 1")
    return arr


@dataclass(frozen=True)
class TopicMatrix:
    """p x K column-stochastic word-topic matrix."""

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _as_stochastic(self.entries, "TopicMatrix"))

    @property
    def p(self) -> int:
        return self.entries.shape[0]

    @property
    def K(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class WeightMatrix:
    """K x n column-stochastic topic-document matrix."""

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _as_stochastic(self.entries, "WeightMatrix"))

    @property
    def K(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class AnchorPartition:
    """K disjoint, nonempty groups of anchor word indices; group k belongs to topic k."""

    groups: tuple

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        if not groups:
            raise ModelError("anchor partition has no groups")
        seen = set()
        for k, g in enumerate(groups):
            if not g:
                raise ModelError(f"anchor group {k} is empty")
            if len(set(g)) != len(g):
                raise ModelError(f"anchor group {k} repeats an index")
            if seen.intersection(g):
                raise ModelError(f"anchor group {k} overlaps an earlier group")
            if min(g) < 0:
                raise ModelError(f"anchor group {k} has a negative index")
            seen.update(g)
        object.__setattr__(self, "groups", groups)

    @property
    def K(self) -> int:
        return len(self.groups)

    @property
    def indices(self) -> np.ndarray:
        """All anchor indices, group by group."""
        return np.array([i for g in self.groups for i in g], dtype=int)

    def labels(self) -> np.ndarray:
        """Topic label of each entry of ``indices``."""
        return np.array([k for k, g in enumerate(self.groups) for _ in g], dtype=int)

    def complement(self, p: int) -> np.ndarray:
        self.check_range(p)
        mask = np.ones(p, dtype=bool)
        mask[self.indices] = False
        return np.flatnonzero(mask)

    def check_range(self, p: int):
        if self.indices.max() >= p:
            raise ModelError(f"anchor index {self.indices.max()} out of range for p={p}")

    def permuted(self, perm) -> "AnchorPartition":
        """Partition after relabelling word ``j`` as ``perm[j]``."""
        perm = np.asarray(perm)
        return AnchorPartition(tuple(tuple(int(perm[i]) for i in g) for g in self.groups))


@dataclass(frozen=True)
class CorpusCounts:
    """p x n matrix of word counts; ``lengths`` are the column sums N_i."""

    counts: np.ndarray
    lengths: np.ndarray = None

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2:
            raise ModelError(f"counts must be 2-d, got shape {counts.shape}")
        if not np.all(np.isfinite(counts)) or np.any(counts < 0) or np.any(counts != np.round(counts)):
            raise ModelError("counts must be nonnegative integers")
        counts = counts.astype(np.int64)
        sums = counts.sum(axis=0)
        if self.lengths is None:
            lengths = sums
        else:
            lengths = np.asarray(self.lengths, dtype=np.int64)
            if lengths.shape != sums.shape or np.any(lengths != sums):
                raise ModelError("document lengths disagree with count column sums")
        short = np.flatnonzero(lengths < 2)
        if short.size:
            raise ModelError(f"documents {short[:10].tolist()} have fewer than 2 words")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "lengths", lengths)

    @property
    def p(self) -> int:
        return self.counts.shape[0]

    @property
    def n(self) -> int:
        return self.counts.shape[1]


@dataclass
class ValidationReport:
    anchor_status: list = field(default_factory=list)  # per topic: list of (word, is_true_anchor)
    lambda_min_wwt: float = 0.0
    violations: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations


def validate_model(A: TopicMatrix, W: WeightMatrix, anchors: AnchorPartition, tol=1e-12) -> ValidationReport:
    """Check separability of the declared anchors and positive definiteness of WW'/n.

    Violations are listed in the report rather than raised; only dimension
    mismatches raise.
    """
    a, w = A.entries, W.entries
    if a.shape[1] != w.shape[0]:
        raise ModelError(f"A has {a.shape[1]} topics but W has {w.shape[0]}")
    if anchors.K != a.shape[1]:
        raise ModelError(f"anchor partition has {anchors.K} groups for K={a.shape[1]}")
    anchors.check_range(a.shape[0])

    report = ValidationReport()
    for k, group in enumerate(anchors.groups):
        status = []
        for j in group:
            others = np.delete(a[j], k)
            ok = bool(a[j, k] > 0 and np.all(others == 0))
            status.append((j, ok))
            if not ok:
                report.violations.append(f"separability: word {j} is not an anchor of topic {k}")
        report.anchor_status.append(status)

    gram = w @ w.T / w.shape[1]
    report.lambda_min_wwt = float(np.linalg.eigvalsh(gram)[0])
    if report.lambda_min_wwt <= tol:
        report.violations.append(
            f"positive definiteness: lambda_min(WW'/n) = {report.lambda_min_wwt:.3e}")
    return report


@dataclass(frozen=True)
class PopulationMoments:
    Pi: np.ndarray
    Theta: np.ndarray
    D_Pi: np.ndarray  # diagonal, stored as a vector
    D_W: np.ndarray
    R: np.ndarray
    M: np.ndarray
    B: np.ndarray


def population_moments(A: TopicMatrix, W: WeightMatrix) -> PopulationMoments:
    """Exact second moments of the noise-free model."""
    a, w = A.entries, W.entries
    if a.shape[1] != w.shape[0]:
        raise ModelError(f"A has {a.shape[1]} topics but W has {w.shape[0]}")
    n = w.shape[1]
    Pi = a @ w
    d_pi = Pi.sum(axis=1) / n
    zero = np.flatnonzero(d_pi <= 0)
    if zero.size:
        raise ModelError(f"word {zero[0]} has zero expected frequency")
    d_w = w.sum(axis=1) / n
    if np.any(d_w <= 0):
        raise ModelError(f"topic {np.flatnonzero(d_w <= 0)[0]} has zero total weight")
    theta = Pi @ Pi.T / n
    R = theta / np.outer(d_pi, d_pi)
    M = (w @ w.T / n) / np.outer(d_w, d_w)
    B = a * d_w[None, :] / d_pi[:, None]
    return PopulationMoments(Pi=Pi, Theta=theta, D_Pi=d_pi, D_W=d_w, R=R, M=M, B=B)
