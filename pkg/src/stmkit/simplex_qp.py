"""Quadratic programs over the probability simplex.

    minimize  b'(M + lam I)b - 2 b'h   subject to  b >= 0, sum(b) = 1

Solved by monotone accelerated projected gradient (FISTA with function-value
restart), vectorized over many right-hand sides sharing the same quadratic
form, followed by an equality-constrained polish on the detected support.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

logger = logging.getLogger(__name__)

PSD_FLOOR = -1e-8
ROUNDING_SLACK = 1e-14
MAX_ORACLE_K = 4


class QpError(ValueError):
    pass


@dataclass(frozen=True)
class QpProblem:
    M: np.ndarray
    h: np.ndarray
    lam: float = 0.0

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        h = np.asarray(self.h, dtype=float).ravel()
        if M.shape != (h.size, h.size):
            raise QpError(f"M has shape {M.shape} but h has {h.size} entries")
        if not np.allclose(M, M.T, rtol=0, atol=1e-10):
            raise QpError("M is not symmetric")
        if self.lam < 0:
            raise QpError(f"lambda must be nonnegative, got {self.lam}")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "h", h)

    @property
    def Q(self) -> np.ndarray:
        return self.M + self.lam * np.eye(self.h.size)

    def objective(self, beta) -> float:
        beta = np.asarray(beta, dtype=float)
        return float(beta @ self.Q @ beta - 2 * beta @ self.h)


@dataclass
class QpSolution:
    beta: np.ndarray
    objective: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection of ``v`` (or of each row of a 2-d ``v``) onto the unit simplex."""
    v = np.asarray(v, dtype=float)
    flat = v.ndim == 1
    V = np.atleast_2d(v)
    K = V.shape[1]
    U = -np.sort(-V, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    ks = np.arange(1, K + 1)
    cond = U - css / ks > 0
    # cond is true on a prefix; its length is the support size
    rho = K - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(V.shape[0]), rho] / (rho + 1)
    out = np.maximum(V - theta[:, None], 0.0)
    return out[0] if flat else out


def _objectives(B, Q, H):
    return np.einsum("ij,ij->i", B @ Q, B) - 2 * np.einsum("ij,ij->i", B, H)


def _pg_residual(B, Q, H, L):
    step = project_simplex(B - (B @ Q - H) / L)
    return np.abs(step - B).max(axis=1)


def _polish(beta, Q, h):
    """Solve the KKT system on the support of ``beta``; None if the result leaves the simplex."""
    S = np.flatnonzero(beta > 0)
    k = S.size
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = Q[np.ix_(S, S)]
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.append(h[S], 1.0)
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(sol)) or np.any(sol[:k] < 0):
        return None
    out = np.zeros_like(beta)
    out[S] = sol[:k]
    return out


def solve_simplex_qp_rows(M, H, lam=0.0, tol=1e-10, max_iter=10000, record_history=False):
    """Solve one simplex QP per row of ``H`` (shape m x K), all sharing ``M + lam I``.

    Returns (betas, objectives, iterations, converged[, history]) with one
    entry per row. Raises QpError when M + lam I is not positive semidefinite.
    """
    M = np.asarray(M, dtype=float)
    H = np.atleast_2d(np.asarray(H, dtype=float))
    m, K = H.shape
    Q = M + lam * np.eye(K)
    evals = np.linalg.eigvalsh(Q)
    if evals[0] < PSD_FLOOR:
        raise QpError(f"M + lambda I is not PSD (lambda_min = {evals[0]:.3e})")
    L = max(evals[-1], 1e-12)

    x = np.full((m, K), 1.0 / K)
    fx = _objectives(x, Q, H)
    y = x.copy()
    t = np.ones(m)
    iters = np.zeros(m, dtype=int)
    res = _pg_residual(x, Q, H, L)
    done = res <= tol
    history = [fx[0]] if record_history else None

    for _ in range(max_iter):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        xa, ya, ta, Ha = x[act], y[act], t[act], H[act]
        z = project_simplex(ya - (ya @ Q - Ha) / L)
        fz = _objectives(z, Q, Ha)
        # near the optimum objective changes fall below rounding; allow that slack
        accept = fz <= fx[act] + ROUNDING_SLACK * (1 + np.abs(fx[act]))
        x_new = np.where(accept[:, None], z, xa)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * ta * ta))
        y_new = (x_new + (ta / t_new)[:, None] * (z - x_new)
                 + ((ta - 1) / t_new)[:, None] * (x_new - xa))
        # restart momentum where the step failed to decrease the objective
        t_new = np.where(accept, t_new, 1.0)
        y_new = np.where(accept[:, None], y_new, x_new)

        x[act], y[act], t[act] = x_new, y_new, t_new
        fx[act] = np.where(accept, fz, fx[act])
        iters[act] += 1
        res[act] = _pg_residual(x_new, Q, Ha, L)
        done[act] = res[act] <= tol
        if record_history:
            history.append(fx[0])

    for i in range(m):
        cand = _polish(x[i], Q, H[i])
        if cand is None:
            continue
        c_res = _pg_residual(cand[None, :], Q, H[i:i + 1], L)[0]
        c_obj = _objectives(cand[None, :], Q, H[i:i + 1])[0]
        if c_res <= res[i] and c_obj <= fx[i] + 1e-12 * (1 + abs(fx[i])):
            x[i], fx[i], res[i] = cand, c_obj, c_res
            done[i] = c_res <= tol
            if record_history and i == 0:
                history.append(c_obj)

    if not done.all():
        logger.debug("%d of %d simplex QPs hit max_iter=%d", (~done).sum(), m, max_iter)
    out = (x, fx, iters, done)
    return out + (history,) if record_history else out


def solve_simplex_qp(prob: QpProblem, tol=1e-10, max_iter=10000, record_history=False) -> QpSolution:
    res = solve_simplex_qp_rows(prob.M, prob.h[None, :], prob.lam, tol=tol,
                                max_iter=max_iter, record_history=record_history)
    x, fx, iters, done = res[:4]
    return QpSolution(beta=x[0], objective=float(fx[0]), iterations=int(iters[0]),
                      converged=bool(done[0]), history=list(res[4]) if record_history else [])


def _compositions(K, total):
    if K == 1:
        return np.array([[total]])
    if K == 2:
        i = np.arange(total + 1)
        return np.stack([i, total - i], axis=1)
    blocks = []
    for first in range(total + 1):
        rest = _compositions(K - 1, total - first)
        blocks.append(np.column_stack([np.full(rest.shape[0], first), rest]))
    return np.vstack(blocks)


@lru_cache(maxsize=8)
def simplex_lattice(K: int, resolution: int) -> np.ndarray:
    """All points of the simplex with coordinates in {0, 1/resolution, ..., 1}."""
    return _compositions(K, resolution) / resolution


def brute_force_simplex_qp(prob: QpProblem, grid_step=1e-3) -> QpSolution:
    """Exhaustive minimization over the simplex lattice of spacing ``grid_step``."""
    K = prob.h.size
    if K > MAX_ORACLE_K:
        raise QpError(f"lattice oracle supports K <= {MAX_ORACLE_K}, got {K}")
    resolution = int(round(1.0 / grid_step))
    if resolution < 1 or abs(resolution * grid_step - 1.0) > 1e-9:
        raise QpError(f"grid_step must be 1/integer, got {grid_step}")
    pts = simplex_lattice(K, resolution)
    vals = _objectives(pts, prob.Q, np.broadcast_to(prob.h, pts.shape))
    best = int(np.argmin(vals))
    return QpSolution(beta=pts[best].copy(), objective=float(vals[best]),
                      iterations=pts.shape[0], converged=True)
