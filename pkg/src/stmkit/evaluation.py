"""Permutation-aligned l1 loss and the sparsity / rate sweep harness."""
from __future__ import annotations

import csv
import io
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .estimator import STMConfig, check_report, run_stm
from .model import ModelError, TopicMatrix
from .synthgen import SynthConfig, make_dataset, make_topic_matrix, sparsity_level

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["grid_value", "reps", "mean_loss", "sd_loss", "sparsity", "seconds"]


def _entries(A):
    return A.entries if isinstance(A, TopicMatrix) else np.asarray(A, dtype=float)


def l1_cost_matrix(A_hat, A_ref) -> np.ndarray:
    """C[k, l] = ||A_hat[:, k] - A_ref[:, l]||_1."""
    a, b = _entries(A_hat), _entries(A_ref)
    return np.abs(a[:, :, None] - b[:, None, :]).sum(axis=0)


def permutation_loss(cost, perm) -> float:
    """sum_k cost[perm[k], k], accumulated in order of k."""
    total = 0.0
    for k, j in enumerate(perm):
        total += cost[j, k]
    return total


def aligned_l1_loss(A_hat, A_ref):
    """min over column permutations of ||A_hat - A_ref||_1, divided by K.

    Returns (loss, perm) where column ``perm[k]`` of ``A_hat`` is matched to
    column ``k`` of ``A_ref``.
    """
    a, b = _entries(A_hat), _entries(A_ref)
    if a.shape != b.shape:
        raise ModelError(f"shape mismatch: {a.shape} vs {b.shape}")
    cost = l1_cost_matrix(a, b)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(a.shape[1], dtype=int)
    perm[cols] = rows
    return permutation_loss(cost, perm) / a.shape[1], perm


@dataclass
class SweepResult:
    grid_value: float
    reps: int
    mean_loss: float
    sd_loss: float
    sparsity: float
    seconds: float
    failed: int = 0
    violations: int = 0
    losses: tuple = ()


def _one_rep(task):
    """Generate one corpus, estimate, and score. Runs inside a worker."""
    cfg, eta, rep, stm_cfg = task
    t0 = time.perf_counter()
    try:
        A, anchors = make_topic_matrix(cfg, eta)
        data = make_dataset(cfg, rep, A, anchors)
        report = run_stm(data.corpus, anchors, stm_cfg)
        loss, _ = aligned_l1_loss(report.A_hat, A)
        problems = check_report(report, anchors)
    except Exception as exc:  # logged and counted by the caller
        return {"ok": False, "error": f"{type(exc).__name__}: {exc}", "seconds": time.perf_counter() - t0}
    return {"ok": True, "loss": loss, "sparsity": sparsity_level(A), "violations": len(problems),
            "problems": problems, "seconds": time.perf_counter() - t0}


def resolve_threads(threads=None) -> int:
    if threads is None:
        env = os.environ.get("STMKIT_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def _run_tasks(tasks, threads):
    threads = resolve_threads(threads)
    if threads == 1 or len(tasks) == 1:
        return [_one_rep(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_one_rep, tasks))


def _summarize(grid_value, outcomes):
    good = [o for o in outcomes if o["ok"]]
    for o in outcomes:
        if not o["ok"]:
            logger.warning("grid value %s: repetition failed: %s", grid_value, o["error"])
    losses = np.array([o["loss"] for o in good])
    return SweepResult(
        grid_value=float(grid_value),
        reps=len(good),
        mean_loss=float(losses.mean()) if good else float("nan"),
        sd_loss=float(losses.std(ddof=1)) if len(good) > 1 else 0.0,
        sparsity=float(np.mean([o["sparsity"] for o in good])) if good else float("nan"),
        seconds=float(sum(o["seconds"] for o in outcomes)),
        failed=len(outcomes) - len(good),
        violations=int(sum(o["violations"] for o in good)),
        losses=tuple(float(v) for v in losses),
    )


def sweep_sparsity(base_cfg: SynthConfig, etas, reps: int, stm_cfg: STMConfig = None, threads=None):
    """Aligned loss of the estimator on A(eta) for each eta, ``reps`` corpora per level."""
    stm_cfg = stm_cfg or STMConfig()
    tasks = [(base_cfg, float(eta), rep, stm_cfg) for eta in etas for rep in range(reps)]
    outcomes = _run_tasks(tasks, threads)
    return [_summarize(eta, outcomes[i * reps:(i + 1) * reps]) for i, eta in enumerate(etas)]


def sweep_rate(base_cfg: SynthConfig, nN_factors, reps: int, stm_cfg: STMConfig = None, threads=None):
    """Scale the number of documents by each factor, holding A and N fixed.

    Returns (results, slope) where ``slope`` is the least-squares slope of
    log(mean loss) against log(n N); ``grid_value`` is n N.
    """
    stm_cfg = stm_cfg or STMConfig()
    cfgs = []
    for f in nN_factors:
        if f < 1:
            raise ValueError(f"scale factors must be >= 1, got {f}")
        n = int(round(base_cfg.n * f))
        lengths = None
        if base_cfg.lengths is not None:
            lengths = np.resize(base_cfg.doc_lengths(), n).tolist()
        cfgs.append(replace(base_cfg, n=n, lengths=lengths))
    tasks = [(c, c.eta, rep, stm_cfg) for c in cfgs for rep in range(reps)]
    outcomes = _run_tasks(tasks, threads)
    results = [_summarize(float(np.sum(c.doc_lengths())), outcomes[i * reps:(i + 1) * reps])
               for i, c in enumerate(cfgs)]
    slope = loglog_slope([r.grid_value for r in results], [r.mean_loss for r in results])
    return results, slope


def loglog_slope(x, y) -> float:
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if lx.size < 2 or np.ptp(lx) == 0:
        return float("nan")
    return float(np.polyfit(lx, ly, 1)[0])


def results_to_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        w.writerow(["%.17g" % r.grid_value, r.reps, "%.17g" % r.mean_loss, "%.17g" % r.sd_loss,
                    "%.17g" % r.sparsity, "%.6f" % r.seconds])
    return buf.getvalue()
