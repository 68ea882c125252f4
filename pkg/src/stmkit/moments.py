"""Sample moments: word means, the unbiased co-occurrence estimator and its normalization.

Co-occurrence blocks are accumulated over fixed-size document chunks and the
chunk partials are combined by pairwise tree summation, so the result only
depends on ``chunk_size`` and never on how the work is scheduled.
"""
from __future__ import annotations

import numpy as np

from .model import CorpusCounts, ModelError

DEFAULT_CHUNK = 256
TILE = 64


def doc_frequencies(counts) -> np.ndarray:
    """Column-normalize a count matrix: X[:, i] = counts[:, i] / N_i."""
    c = counts.counts if isinstance(counts, CorpusCounts) else np.asarray(counts)
    lengths = c.sum(axis=0)
    empty = np.flatnonzero(lengths <= 0)
    if empty.size:
        raise ModelError(f"document {empty[0]} is empty")
    return c / lengths


def word_means(X) -> np.ndarray:
    return np.asarray(X).mean(axis=1)


def tree_sum(parts):
    """Pairwise sum of a list of equally shaped arrays in a fixed order."""
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to sum")
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def cooccurrence_block(X, lengths, rows, cols, chunk_size=DEFAULT_CHUNK) -> np.ndarray:
    """Rows x cols block of the unbiased estimator of Theta = Pi Pi' / n.

    Theta_hat = n^-1 sum_i [ N_i/(N_i-1) X_i X_i' - (N_i-1)^-1 diag(X_i) ].
    """
    X = np.asarray(X, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    rows = np.asarray(rows, dtype=int)
    cols = np.asarray(cols, dtype=int)
    n = X.shape[1]
    if lengths.shape != (n,):
        raise ModelError(f"expected {n} document lengths, got {lengths.shape}")
    short = np.flatnonzero(lengths < 2)
    if short.size:
        raise ModelError(f"document {short[0]} has N_i = {lengths[short[0]]:g} < 2")

    scale = lengths / (lengths - 1.0)
    inv = 1.0 / (lengths - 1.0)

    out = np.empty((rows.size, cols.size))
    for r0 in range(0, rows.size, TILE):
        rt = rows[r0:r0 + TILE]
        for c0 in range(0, cols.size, TILE):
            ct = cols[c0:c0 + TILE]
            ri, ci = np.nonzero(rt[:, None] == ct[None, :])
            parts = []
            for start in range(0, n, chunk_size):
                sl = slice(start, min(start + chunk_size, n))
                Xr = np.ascontiguousarray(X[rt, sl])
                Xc = np.ascontiguousarray(X[ct, sl])
                # x_a * x_b is commutative, so square blocks come out exactly
                # symmetric; reducing along the contiguous document axis makes
                # each entry independent of tile and block shape
                part = ((Xr[:, None, :] * Xc[None, :, :]) * scale[sl]).sum(axis=-1)
                if ri.size:
                    part[ri, ci] -= (X[rt[ri], sl] * inv[sl]).sum(axis=-1)
                parts.append(part)
            out[r0:r0 + TILE, c0:c0 + TILE] = tree_sum(parts)
    return out / n


def normalized_cooccurrence(theta_block, d_x, rows, cols) -> np.ndarray:
    """R_hat block: Theta_hat_jl / (d_x[j] d_x[l])."""
    d_x = np.asarray(d_x, dtype=float)
    rows = np.asarray(rows, dtype=int)
    cols = np.asarray(cols, dtype=int)
    dr, dc = d_x[rows], d_x[cols]
    if np.any(dr <= 0) or np.any(dc <= 0):
        bad = np.concatenate([rows[dr <= 0], cols[dc <= 0]])
        raise ModelError(f"word {bad[0]} has zero mean frequency; threshold it out first")
    return np.asarray(theta_block, dtype=float) / np.outer(dr, dc)
