"""Text formats for matrices and anchor partitions.

Dense matrices are tab-separated, one row per word. Sparse matrices use a
triplet format: a header line ``rows cols`` followed by ``row col value``
lines (0-based). Anchor files hold one line per topic: the topic index
followed by its word indices. Files are written to a temporary sibling and
renamed into place.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .model import AnchorPartition, ModelError

SPARSE_SUFFIXES = {".triplet", ".triplets", ".coo"}


def atomic_write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % x


def format_dense(matrix) -> str:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ModelError(f"expected a 2-d matrix, got shape {matrix.shape}")
    is_int = np.issubdtype(matrix.dtype, np.integer)
    lines = []
    for row in matrix:
        if is_int:
            lines.append("\t".join(str(int(v)) for v in row))
        else:
            lines.append("\t".join("%.17g" % v for v in row))
    return "\n".join(lines) + "\n"


def format_triplets(matrix) -> str:
    matrix = np.asarray(matrix)
    rows, cols = np.nonzero(matrix)
    lines = [f"{matrix.shape[0]} {matrix.shape[1]}"]
    lines.extend(f"{r} {c} {_fmt(matrix[r, c])}" for r, c in zip(rows, cols))
    return "\n".join(lines) + "\n"


def write_matrix(path, matrix, fmt=None):
    """Write ``matrix``; ``fmt`` is 'dense' or 'sparse' (default from the suffix)."""
    fmt = fmt or ("sparse" if Path(path).suffix in SPARSE_SUFFIXES else "dense")
    text = format_triplets(matrix) if fmt == "sparse" else format_dense(matrix)
    atomic_write_text(path, text)


def _parse_number(tok: str):
    try:
        return int(tok)
    except ValueError:
        return float(tok)


def read_matrix(path, fmt=None) -> np.ndarray:
    """Read a dense TSV or sparse triplet file. Integer files give int64 arrays."""
    path = Path(path)
    fmt = fmt or ("sparse" if path.suffix in SPARSE_SUFFIXES else "dense")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ModelError(f"{path}: empty matrix file")
    if fmt == "sparse":
        header = lines[0].split()
        if len(header) != 2:
            raise ModelError(f"{path}: triplet header must be 'rows cols'")
        shape = (int(header[0]), int(header[1]))
        entries = [ln.split() for ln in lines[1:]]
        values = [_parse_number(e[2]) for e in entries]
        is_int = all(isinstance(v, int) for v in values)
        out = np.zeros(shape, dtype=np.int64 if is_int else float)
        for lineno, (e, v) in enumerate(zip(entries, values), start=2):
            if len(e) != 3:
                raise ModelError(f"{path}:{lineno}: expected 'row col value'")
            r, c = int(e[0]), int(e[1])
            if not (0 <= r < shape[0] and 0 <= c < shape[1]):
                raise ModelError(f"{path}:{lineno}: index ({r}, {c}) outside {shape}")
            out[r, c] = v
        return out
    rows = [ln.split("\t") if "\t" in ln else ln.split() for ln in lines]
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ModelError(f"{path}: ragged rows")
    values = [[_parse_number(t) for t in r] for r in rows]
    if all(isinstance(v, int) for r in values for v in r):
        return np.array(values, dtype=np.int64)
    return np.array(values, dtype=float)


def write_anchors(path, anchors: AnchorPartition):
    lines = [" ".join(str(v) for v in (k, *g)) for k, g in enumerate(anchors.groups)]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_anchors(path) -> AnchorPartition:
    groups = {}
    for lineno, ln in enumerate(Path(path).read_text().splitlines(), start=1):
        toks = ln.split()
        if not toks or toks[0].startswith("#"):
            continue
        k = int(toks[0])
        if k in groups:
            raise ModelError(f"{path}:{lineno}: topic {k} listed twice")
        groups[k] = [int(t) for t in toks[1:]]
    if sorted(groups) != list(range(len(groups))):
        raise ModelError(f"{path}: topic indices must be 0..K-1")
    return AnchorPartition(tuple(groups[k] for k in range(len(groups))))


def write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")
