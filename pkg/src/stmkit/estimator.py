"""Sparse topic model estimator: word-topic matrix from counts and a known anchor partition.

Pipeline: word frequencies -> D_X -> threshold low-frequency non-anchor words
-> normalized co-occurrence blocks on (L x L) and (L x kept) -> group-averaged
(M_hat, H_hat) -> ridge level from the data-driven grid -> one simplex QP per
kept non-anchor word -> renormalize D_X B_hat to unit column sums.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .model import AnchorPartition, CorpusCounts, ModelError, PopulationMoments, TopicMatrix
from .moments import cooccurrence_block, doc_frequencies, normalized_cooccurrence, word_means
from .simplex_qp import solve_simplex_qp_rows

logger = logging.getLogger(__name__)


class EstimationError(RuntimeError):
    pass


@dataclass
class STMConfig:
    c0: float = 0.01
    tol: float = 1e-10
    max_iter: int = 10000
    force_lambda: float = None  # bypasses the lambda grid
    t_min: int = 0
    t_max: int = 100
    threshold_const: float = 7.0
    strict: bool = False  # raise when a row QP fails to converge
    chunk_size: int = 256


@dataclass
class MixingMoments:
    m_hat: np.ndarray
    h_hat: np.ndarray  # K x |lcomp|
    lcomp: np.ndarray


@dataclass
class BEstimate:
    B_hat: np.ndarray
    mixing: MixingMoments
    thresholded: np.ndarray
    lam: float
    t_star: int
    qp_converged: np.ndarray  # aligned with mixing.lcomp
    qp_iterations: np.ndarray
    warnings: list = field(default_factory=list)


@dataclass
class EstimationReport:
    A_hat: TopicMatrix
    B_hat: np.ndarray
    lambda_used: float
    t_star: int
    thresholded: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    mixing: MixingMoments = None

    def to_json(self) -> dict:
        return {
            "lambda_used": float(self.lambda_used),
            "t_star": None if self.t_star is None else int(self.t_star),
            "thresholded": [int(j) for j in self.thresholded],
            "diagnostics": self.diagnostics,
        }


def anchor_rows(anchors: AnchorPartition, p: int) -> np.ndarray:
    """p x K matrix with row i = e_k for i in L_k and NaN on every other row."""
    anchors.check_range(p)
    B = np.full((p, anchors.K), np.nan)
    B[anchors.indices] = 0.0
    B[anchors.indices, anchors.labels()] = 1.0
    return B


def group_average_moments(r_LL, r_LLc, anchors: AnchorPartition, lcomp=None) -> MixingMoments:
    """Average R_hat within anchor groups.

    ``r_LL`` and the rows of ``r_LLc`` are ordered as ``anchors.indices``.
    """
    r_LL = np.asarray(r_LL, dtype=float)
    r_LLc = np.asarray(r_LLc, dtype=float).reshape(r_LL.shape[0], -1)
    labels = anchors.labels()
    K = anchors.K
    sizes = np.bincount(labels, minlength=K)
    if np.any(sizes == 0):
        raise ModelError(f"anchor group {np.flatnonzero(sizes == 0)[0]} is empty")
    # averaging operator (B_L'B_L)^-1 B_L'
    P = np.zeros((K, labels.size))
    P[labels, np.arange(labels.size)] = 1.0 / sizes[labels]
    m_hat = P @ r_LL @ P.T
    m_hat = 0.5 * (m_hat + m_hat.T)
    h_hat = P @ r_LLc
    lcomp = np.arange(h_hat.shape[1]) if lcomp is None else np.asarray(lcomp)
    return MixingMoments(m_hat=m_hat, h_hat=h_hat, lcomp=lcomp)


def threshold_cutoff(n: int, p: int, N_bar: float, const=7.0) -> float:
    return const * np.log(max(n, p)) / (n * N_bar)


def harmonic_length(lengths) -> float:
    lengths = np.asarray(lengths, dtype=float)
    return lengths.size / np.sum(1.0 / lengths)


def threshold_set(d_x, n, p, N_bar, anchors: AnchorPartition = None, const=7.0) -> np.ndarray:
    """Non-anchor words whose mean frequency is at or below the noise cutoff."""
    d_x = np.asarray(d_x, dtype=float)
    low = d_x <= threshold_cutoff(n, p, N_bar, const)
    if anchors is not None:
        low[anchors.indices] = False
    return np.flatnonzero(low)


def lambda_grid_unit(d_x, anchors: AnchorPartition, lengths, c0=0.01, p=None) -> float:
    """lambda(1) of the data-driven grid; lambda(t) = t * lambda(1)."""
    d_x = np.asarray(d_x, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    n = lengths.size
    p = d_x.size if p is None else p
    K = anchors.K
    d_min = d_x[anchors.indices].min()
    if d_min <= 0:
        raise EstimationError("an anchor word never occurs; its frequency must be positive")
    inner = K * np.log(max(n, p)) / (d_min * n) * np.mean(1.0 / lengths)
    return c0 * K * np.sqrt(inner)


def invertibility_floor(m_hat) -> float:
    K = m_hat.shape[0]
    return max(1e-10 * np.trace(m_hat) / K, 0.0)


def lambda_select(m_hat, d_x, anchors: AnchorPartition, lengths, c0=0.01, t_min=0, t_max=100, p=None):
    """Smallest grid point t >= t_min with lambda_min(M_hat + lambda(t) I) above the floor.

    Returns (lambda, t_star).
    """
    m_hat = np.asarray(m_hat, dtype=float)
    eps = invertibility_floor(m_hat)
    ev_min = np.linalg.eigvalsh(m_hat)[0]
    if t_min == 0 and ev_min > eps:
        return 0.0, 0
    unit = lambda_grid_unit(d_x, anchors, lengths, c0, p)
    for t in range(max(t_min, 0), t_max + 1):
        lam = t * unit
        if ev_min + lam > eps:
            return lam, t
    raise EstimationError(
        f"no grid point up to t_max={t_max} makes M_hat invertible "
        f"(lambda_min = {ev_min:.3e}, lambda(1) = {unit:.3e})")


def _solve_rows(mixing, lam, p, anchors, cfg):
    B = np.zeros((p, anchors.K))
    B[anchors.indices, anchors.labels()] = 1.0
    if mixing.lcomp.size == 0:
        return B, np.zeros(0, bool), np.zeros(0, int)
    betas, _, iters, conv = solve_simplex_qp_rows(
        mixing.m_hat, mixing.h_hat.T, lam, tol=cfg.tol, max_iter=cfg.max_iter)
    B[mixing.lcomp] = betas
    if not conv.all():
        bad = mixing.lcomp[~conv]
        msg = f"{bad.size} row QPs did not converge (first word {bad[0]})"
        if cfg.strict:
            raise EstimationError(msg)
        logger.warning(msg)
    return B, conv, iters


def estimate_B(counts: CorpusCounts, anchors: AnchorPartition, config: STMConfig = None, X=None, d_x=None) -> BEstimate:
    cfg = config or STMConfig()
    p, n = counts.p, counts.n
    anchors.check_range(p)
    if X is None:
        X = doc_frequencies(counts)
    if d_x is None:
        d_x = word_means(X)
    L = anchors.indices
    warnings = []

    thresholded = threshold_set(d_x, n, p, harmonic_length(counts.lengths), anchors, cfg.threshold_const)
    cutoff = threshold_cutoff(n, p, harmonic_length(counts.lengths), cfg.threshold_const)
    weak = L[d_x[L] <= cutoff]
    if weak.size:
        msg = f"anchor words {weak.tolist()} fall below the frequency cutoff {cutoff:.3e}"
        warnings.append(msg)
        logger.warning(msg)

    keep = np.setdiff1d(anchors.complement(p), thresholded)
    cols = np.concatenate([L, keep])
    theta = cooccurrence_block(X, counts.lengths, L, cols, chunk_size=cfg.chunk_size)
    r = normalized_cooccurrence(theta, d_x, L, cols)
    mixing = group_average_moments(r[:, :L.size], r[:, L.size:], anchors, lcomp=keep)

    if cfg.force_lambda is not None:
        lam, t_star = float(cfg.force_lambda), None
    else:
        lam, t_star = lambda_select(mixing.m_hat, d_x, anchors, counts.lengths,
                                    cfg.c0, cfg.t_min, cfg.t_max, p)
    B, conv, iters = _solve_rows(mixing, lam, p, anchors, cfg)
    return BEstimate(B_hat=B, mixing=mixing, thresholded=thresholded, lam=lam, t_star=t_star,
                     qp_converged=conv, qp_iterations=iters, warnings=warnings)


def normalize_to_A(d_x, B_hat) -> TopicMatrix:
    """Rescale D_X B_hat to unit column sums."""
    DB = np.asarray(d_x, dtype=float)[:, None] * np.asarray(B_hat, dtype=float)
    sums = DB.sum(axis=0)
    dead = np.flatnonzero(sums <= 0)
    if dead.size:
        raise EstimationError(f"no surviving word loads on topic {dead[0]}")
    A = DB / sums
    # absorb rounding so columns sum to one at double precision
    A /= A.sum(axis=0)
    return TopicMatrix(A)


def run_stm(counts: CorpusCounts, anchors: AnchorPartition, config: STMConfig = None) -> EstimationReport:
    """Estimate the word-topic matrix from a corpus and a known anchor partition."""
    cfg = config or STMConfig()
    t0 = time.perf_counter()
    X = doc_frequencies(counts)
    d_x = word_means(X)
    t1 = time.perf_counter()
    est = estimate_B(counts, anchors, cfg, X=X, d_x=d_x)
    t2 = time.perf_counter()
    A_hat = normalize_to_A(d_x, est.B_hat)
    t3 = time.perf_counter()
    diagnostics = {
        "lambda_min_M_hat": float(np.linalg.eigvalsh(est.mixing.m_hat)[0]),
        "lambda_max_M_hat": float(np.linalg.eigvalsh(est.mixing.m_hat)[-1]),
        "n_qp_rows": int(est.mixing.lcomp.size),
        "n_qp_unconverged": int((~est.qp_converged).sum()),
        "unconverged_rows": [int(j) for j in est.mixing.lcomp[~est.qp_converged]],
        "max_qp_iterations": int(est.qp_iterations.max()) if est.qp_iterations.size else 0,
        "warnings": list(est.warnings),
        "seconds": {"moments": t1 - t0, "estimate_B": t2 - t1, "normalize": t3 - t2},
    }
    report = EstimationReport(A_hat=A_hat, B_hat=est.B_hat, lambda_used=est.lam, t_star=est.t_star,
                              thresholded=est.thresholded, diagnostics=diagnostics,
                              mixing=est.mixing)
    return report


def recover_from_population(pm: PopulationMoments, anchors: AnchorPartition, config: STMConfig = None):
    """Noise-free path: feed exact D_Pi and R through the same steps as the estimator.

    No thresholding is applied. Returns (A_hat, B_hat, mixing).
    """
    cfg = config or STMConfig()
    p = pm.R.shape[0]
    L = anchors.indices
    lcomp = anchors.complement(p)
    mixing = group_average_moments(pm.R[np.ix_(L, L)], pm.R[np.ix_(L, lcomp)], anchors, lcomp=lcomp)
    if cfg.force_lambda is not None:
        lam = float(cfg.force_lambda)
    elif np.linalg.eigvalsh(mixing.m_hat)[0] > invertibility_floor(mixing.m_hat):
        lam = 0.0
    else:
        raise EstimationError("population M is singular; W'W/n is not positive definite")
    B, _, _ = _solve_rows(mixing, lam, p, anchors, cfg)
    return normalize_to_A(pm.D_Pi, B), B, mixing


def check_report(report: EstimationReport, anchors: AnchorPartition, tol=1e-10) -> list:
    """Structural invariants of an estimate; returns a list of violation messages."""
    problems = []
    A = report.A_hat.entries
    B = report.B_hat
    if np.any(np.abs(A.sum(axis=0) - 1) > tol):
        problems.append("A_hat columns do not sum to 1")
    if np.any(A < 0):
        problems.append("A_hat has negative entries")
    for k, g in enumerate(anchors.groups):
        off = np.delete(A[list(g)], k, axis=1)
        if np.any(off != 0):
            problems.append(f"anchor rows of topic {k} load on other topics")
    mixing = report.mixing
    if mixing is not None:
        if np.abs(mixing.m_hat - mixing.m_hat.T).max() > tol:
            problems.append("M_hat is not symmetric")
        rows = B[mixing.lcomp]
        if rows.size and (np.any(rows < -1e-12) or np.abs(rows.sum(axis=1) - 1).max() > tol):
            problems.append("B_hat rows off the simplex")
    if report.thresholded.size and np.any(A[report.thresholded] != 0):
        problems.append("thresholded words have nonzero rows in A_hat")
    return problems
