"""Generic single-shooting Newton solver for two-point BVPs.

The unknowns are initial costates (plus optional scalar parameters such
as a time scaling); a rollout maps unknowns to a terminal boundary
residual of the same dimension. The square system is driven to zero by
damped Newton with a forward finite-difference Jacobian and a
backtracking line search on the scaled residual norm. Multi-start: each
seed is attempted independently; converged solutions are ranked by an
optional objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


@dataclass
class ShootingProblem:
    """residual(u) -> r with len(r) == unknown_dim == len(u).

    Rollout failures (integration aborts, singularities) must surface as
    RuntimeError/ValueError from residual(); the driver treats them as
    failed steps. ``objective(u)`` (higher is better) ranks converged
    seeds; ``scale`` holds per-unknown magnitude hints.
    """

    unknown_dim: int
    residual: Callable[[np.ndarray], np.ndarray]
    scale: np.ndarray | None = None
    objective: Callable[[np.ndarray], float] | None = None


@dataclass
class SolverConfig:
    tol: float = 1e-9
    max_newton: int = 50
    fd_eps: float = 1e-7
    max_backtracks: int = 20
    seeds: Sequence[np.ndarray] = field(default_factory=list)
    #: Levenberg damping added to J^T J when the Newton step is unusable.
    lm_floor: float = 1e-12

    def __post_init__(self):
        if self.tol <= 0 or self.fd_eps <= 0:
            raise ValueError("tol and fd_eps must be positive")


@dataclass
class SeedLog:
    seed_index: int
    converged: bool
    residual_norm: float
    iterations: int
    residual_history: list
    abort_reason: str | None = None


@dataclass
class ShootingResult:
    unknowns: np.ndarray
    residual_norm: float
    converged: bool
    iterations: int
    logs: list
    objective: float | None = None


def _scaled_norm(r, scale):
    return float(np.linalg.norm(r / scale))


def solve(problem: ShootingProblem, cfg: SolverConfig) -> ShootingResult:
    """Run damped Newton from every seed; return the best outcome.

    Best = converged solution with the highest objective (when given),
    else the first converged; with no convergence, the lowest-residual
    attempt flagged converged=False.
    """
    if not cfg.seeds:
        raise ValueError("at least one seed is required")
    scale = (np.ones(problem.unknown_dim) if problem.scale is None
             else np.asarray(problem.scale, dtype=float))

    best: ShootingResult | None = None
    logs: list[SeedLog] = []

    for si, seed in enumerate(cfg.seeds):
        u = np.asarray(seed, dtype=float).copy()
        if u.shape != (problem.unknown_dim,):
            raise ValueError(f"seed {si} has shape {u.shape}, expected ({problem.unknown_dim},)")
        history = []
        reason = None
        try:
            r = problem.residual(u)
        except (RuntimeError, ValueError, ArithmeticError) as exc:
            logs.append(SeedLog(si, False, np.inf, 0, [], f"rollout failed: {exc}"))
            continue
        rn = _scaled_norm(r, scale)
        history.append(rn)
        converged = rn <= cfg.tol
        it = 0
        while not converged and it < cfg.max_newton:
            it += 1
            J = _fd_jacobian(problem, u, r, scale, cfg.fd_eps)
            if J is None:
                reason = "Jacobian evaluation failed"
                break
            step = _newton_step(J, r, cfg.lm_floor)
            if step is None:
                reason = "singular Newton system"
                break
            # backtracking line search, halving the step
            alpha = 1.0
            accepted = False
            for _ in range(cfg.max_backtracks + 1):
                try:
                    r_try = problem.residual(u - alpha * step)
                except (RuntimeError, ValueError, ArithmeticError):
                    alpha *= 0.5
                    continue
                rn_try = _scaled_norm(r_try, scale)
                if rn_try < rn:
                    u = u - alpha * step
                    r, rn = r_try, rn_try
                    accepted = True
                    break
                alpha *= 0.5
            history.append(rn)
            if not accepted:
                reason = "line search stalled"
                break
            if rn <= cfg.tol:
                converged = True
        logs.append(SeedLog(si, converged, rn, it, history, reason))

        obj = None
        if converged and problem.objective is not None:
            obj = float(problem.objective(u))
        cand = ShootingResult(unknowns=u, residual_norm=rn, converged=converged,
                              iterations=it, logs=logs, objective=obj)
        best = _better(best, cand)

    if best is None:
        # every seed aborted at its first rollout
        best = ShootingResult(unknowns=np.asarray(cfg.seeds[0], float).copy(),
                              residual_norm=np.inf, converged=False,
                              iterations=0, logs=logs)
    best.logs = logs
    return best


def _better(a: ShootingResult | None, b: ShootingResult) -> ShootingResult:
    if a is None:
        return b
    if a.converged != b.converged:
        return a if a.converged else b
    if a.converged:
        ao = -np.inf if a.objective is None else a.objective
        bo = -np.inf if b.objective is None else b.objective
        return a if ao >= bo else b
    return a if a.residual_norm <= b.residual_norm else b


def _fd_jacobian(problem, u, r0, scale, fd_eps):
    n = len(u)
    J = np.empty((n, n))
    for j in range(n):
        h = fd_eps * max(abs(u[j]), scale[j])
        up = u.copy()
        up[j] += h
        try:
            rj = problem.residual(up)
        except (RuntimeError, ValueError, ArithmeticError):
            up[j] = u[j] - h
            try:
                rj = problem.residual(up)
            except (RuntimeError, ValueError, ArithmeticError):
                return None
            J[:, j] = (r0 - rj) / h
            continue
        J[:, j] = (rj - r0) / h
    return J


def _newton_step(J, r, lm_floor):
    try:
        step = np.linalg.solve(J, r)
        if np.all(np.isfinite(step)):
            return step
    except np.linalg.LinAlgError:
        pass
    # Levenberg fallback for (near-)singular Jacobians
    JtJ = J.T @ J
    mu = lm_floor * max(1.0, float(np.trace(JtJ)) / len(r))
    for _ in range(12):
        try:
            step = np.linalg.solve(JtJ + mu * np.eye(len(r)), J.T @ r)
            if np.all(np.isfinite(step)):
                return step
        except np.linalg.LinAlgError:
            pass
        mu *= 10.0
    return None
