"""Synthetic topic-model data: planted-anchor A, sparsified A(eta), Dirichlet W, multinomial corpora.

Randomness flows from one root seed. ``stream(seed, *key)`` derives an
independent generator for any (repetition, purpose, ...) key, so results do not
depend on the order in which draws are requested.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import AnchorPartition, CorpusCounts, ModelError, TopicMatrix, WeightMatrix

logger = logging.getLogger(__name__)

# purpose tags for substreams
TOPICS, SPARSIFY, WEIGHTS, CORPUS = 1, 2, 3, 4


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


@dataclass
class SynthConfig:
    p: int = 300
    n: int = 300
    K: int = 10
    N: int = 500
    lengths: list = None  # per-document lengths; overrides N when given
    anchors_per_topic: int = 3
    xi: float = None  # anchor frequency; defaults to K / p
    dirichlet_alpha: float = 0.3
    eta: float = 0.0
    seed: int = 0
    extra_zero_words: int = 0  # appended words with zero probability in every topic

    def __post_init__(self):
        if self.xi is None:
            self.xi = self.K / self.p
        self.validate()

    def validate(self):
        if min(self.p, self.n, self.K, self.anchors_per_topic) < 1:
            raise ModelError("p, n, K and anchors_per_topic must be positive")
        if not 0 <= self.eta < 1:
            raise ModelError(f"eta must lie in [0, 1), got {self.eta}")
        if not 0 < self.xi * self.anchors_per_topic < 1:
            raise ModelError("xi * anchors_per_topic must lie in (0, 1)")
        if self.K > self.p - self.K * self.anchors_per_topic:
            raise ModelError("not enough non-anchor words for the requested anchors")
        if self.dirichlet_alpha <= 0:
            raise ModelError("dirichlet_alpha must be positive")
        lengths = self.doc_lengths()
        if lengths.shape != (self.n,) or np.any(lengths < 2):
            raise ModelError("need n document lengths, each at least 2")

    def doc_lengths(self) -> np.ndarray:
        if self.lengths is not None:
            return np.asarray(self.lengths, dtype=np.int64)
        return np.full(self.n, self.N, dtype=np.int64)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["lengths"] is not None:
            d["lengths"] = [int(v) for v in d["lengths"]]
        return d


def generate_A(cfg: SynthConfig, rng: np.random.Generator):
    """Topic matrix with ``anchors_per_topic`` planted anchors per topic.

    Anchors of topic k occupy rows k*m .. k*m+m-1 with value xi; the remaining
    rows are Uniform(0, 1) draws with each column rescaled to mass 1 - m*xi.
    """
    cfg.validate()
    p, K, m = cfg.p, cfg.K, cfg.anchors_per_topic
    A = np.zeros((p, K))
    groups = []
    for k in range(K):
        rows = list(range(k * m, (k + 1) * m))
        A[rows, k] = cfg.xi
        groups.append(rows)
    J = slice(K * m, p)
    block = rng.uniform(0.0, 1.0, size=(p - K * m, K))
    A[J] = block / block.sum(axis=0) * (1.0 - m * cfg.xi)
    if cfg.extra_zero_words:
        A = np.vstack([A, np.zeros((cfg.extra_zero_words, K))])
    return TopicMatrix(A), AnchorPartition(tuple(groups))


def sparsify_A(A: TopicMatrix, anchors: AnchorPartition, eta: float, rng: np.random.Generator) -> TopicMatrix:
    """Zero floor(eta*K) uniformly chosen entries of every non-anchor row, then renormalize columns."""
    if not 0 <= eta < 1:
        raise ModelError(f"eta must lie in [0, 1), got {eta}")
    a = A.entries.copy()
    K = a.shape[1]
    s = int(np.floor(eta * K + 1e-12))
    if s == 0:
        return TopicMatrix(a)
    row_rngs = rng.spawn(a.shape[0])
    for j in anchors.complement(a.shape[0]):
        a[j, row_rngs[j].choice(K, size=s, replace=False)] = 0.0
    sums = a.sum(axis=0)
    dead = np.flatnonzero(sums <= 0)
    if dead.size:
        raise ModelError(f"sparsification removed all mass from topic {dead[0]}")
    return TopicMatrix(a / sums)


def sample_W_dirichlet(K: int, n: int, alpha: float, rng: np.random.Generator) -> WeightMatrix:
    """K x n matrix with i.i.d. symmetric Dirichlet(alpha) columns, via normalized Gamma draws."""
    if alpha <= 0:
        raise ModelError("alpha must be positive")
    g = rng.standard_gamma(alpha, size=(K, n))
    sums = g.sum(axis=0)
    # tiny alpha can underflow every draw in a column
    while np.any(sums <= 0):
        bad = sums <= 0
        g[:, bad] = rng.standard_gamma(alpha, size=(K, int(bad.sum())))
        sums = g.sum(axis=0)
    return WeightMatrix(g / sums)


def sample_corpus(A: TopicMatrix, W: WeightMatrix, lengths, rng: np.random.Generator) -> CorpusCounts:
    """Column i ~ Multinomial(N_i, (AW)[:, i]); each document uses its own substream."""
    lengths = np.asarray(lengths, dtype=np.int64)
    Pi = A.entries @ W.entries
    n = Pi.shape[1]
    if lengths.shape != (n,):
        raise ModelError(f"need {n} document lengths, got shape {lengths.shape}")
    Pi = np.clip(Pi, 0.0, None)
    Pi /= Pi.sum(axis=0)
    counts = np.empty(Pi.shape, dtype=np.int64)
    for i, doc_rng in enumerate(rng.spawn(n)):
        counts[:, i] = doc_rng.multinomial(lengths[i], Pi[:, i])
    return CorpusCounts(counts, lengths)


def sparsity_level(A, mode="exact") -> float:
    """Fraction of nonzero entries (``exact``) or of entries >= 1e-3/p (``approx``)."""
    a = A.entries if isinstance(A, TopicMatrix) else np.asarray(A)
    p, K = a.shape
    if mode == "exact":
        nz = np.count_nonzero(a)
    elif mode == "approx":
        nz = np.count_nonzero(a >= 1e-3 / p)
    else:
        raise ValueError(f"unknown sparsity mode {mode!r}")
    return nz / (p * K)


@dataclass
class SyntheticDataset:
    A: TopicMatrix
    W: WeightMatrix
    anchors: AnchorPartition
    corpus: CorpusCounts
    config: SynthConfig = field(repr=False, default=None)


def make_topic_matrix(cfg: SynthConfig, eta=None):
    """Base A from the root seed, sparsified at ``eta`` (default ``cfg.eta``)."""
    eta = cfg.eta if eta is None else eta
    A, anchors = generate_A(cfg, stream(cfg.seed, TOPICS))
    return sparsify_A(A, anchors, eta, stream(cfg.seed, SPARSIFY, int(round(eta * 1e6)))), anchors


def make_dataset(cfg: SynthConfig, rep: int = 0, A: TopicMatrix = None, anchors=None) -> SyntheticDataset:
    """One synthetic corpus; repetition ``rep`` gets its own W and count substreams."""
    if A is None:
        A, anchors = make_topic_matrix(cfg)
    W = sample_W_dirichlet(cfg.K, cfg.n, cfg.dirichlet_alpha, stream(cfg.seed, WEIGHTS, rep))
    corpus = sample_corpus(A, W, cfg.doc_lengths(), stream(cfg.seed, CORPUS, rep))
    return SyntheticDataset(A=A, W=W, anchors=anchors, corpus=corpus, config=cfg)
