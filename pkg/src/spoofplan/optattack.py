"""Deviation-maximizing undetectable attacks via an indirect BVP.

The attacked input is the explicit feedback u = a_r p + a_t W x with the
bang tangential law a_t = -sgn(lambda^T B W x) sqrt(u_max^2/|p|^2 -
a_r^2); the only freedom is the initial costate lambda(0), found by
single shooting on the terminal condition lambda(T) = -2 [(p(T) -
p_n(T))^T 0]^T (maximization of the squared terminal deviation, taken
verbatim from the optimality conditions).

sgn is smoothed to tanh(z/eps) inside Newton, with a continuation ladder
in eps (singular cruise arcs are representable only through the
smoothing); the reported solution is re-rolled with hard sgn.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, shooting
from .attacks import AttackSignal, builtin_policies
from .dynamics import DOUBLE_INTEGRATOR, Trajectory
from .errors import PositionSingularityError

_A = np.array([[0.0, 0.0, 1.0, 0.0],
               [0.0, 0.0, 0.0, 1.0],
               [0.0, 0.0, 0.0, 0.0],
               [0.0, 0.0, 0.0, 0.0]])
_B = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
_W = np.array([[0.0, -1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]])
_P = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])

#: Tikhonov floor for the stationarity multiplier at bang-magnitude zero.
_NU_REG = 1e-18


@dataclass
class CostateArc:
    lam: np.ndarray            # (n+1, 4)
    nu_multiplier: np.ndarray  # (n,)
    a_t: np.ndarray            # (n,)
    a_r: np.ndarray            # (n,)


@dataclass
class BvpSolution:
    attacked: Trajectory
    costate: CostateArc
    attack: AttackSignal
    terminal_deviation: float
    converged: bool
    shooting_residual: float
    iterations: int
    lam0: np.ndarray
    eps_sgn: float
    logs: list = field(default_factory=list)


@dataclass
class AttackSolverConfig:
    tol: float = 1e-8
    max_newton: int = 60
    fd_eps: float = 1e-7
    max_backtracks: int = 20
    #: relative smoothing ladder (times the switching-function scale);
    #: coarse enough to round the bang edges, never so coarse that the
    #: trivial (non-deviating) root swallows every basin
    eps_ladder: tuple = (1e-2, 1e-3, 1e-4, 1e-5)
    #: relative feasibility band before a rollout aborts as infeasible
    feas_band: float = 1e-2
    extra_seeds: tuple = ()


def radial_tangential(x, u_n, x_n, u_max):
    """(a_r, a_t_budget) at a state pair; budget = sqrt(u_max^2/|p|^2 - a_r^2)."""
    p = x[:2]
    r2 = float(p @ p)
    if r2 < 1e-24:
        raise PositionSingularityError(0.0)
    a_r = float((u_n @ x_n[:2] + x_n[2:] @ x_n[2:] - x[2:] @ x[2:]) / r2)
    m2 = u_max * u_max / r2 - a_r * a_r
    return a_r, math.sqrt(max(m2, 0.0))


def costate_rhs(x, lam, u_n, p_n, v_n, u_max, eps_sgn=0.0):
    """Reference state/costate right-hand side of the attack BVP.

    Returns (xdot, lamdot, a_t, nu). eps_sgn = 0 selects hard sgn with
    the a_t >= 0 tie-break. The costate equation is the exact gradient of
    the adjoined Hamiltonian (see ``hamiltonian``), with a_t and nu held
    at their base values.
    """
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    x_n = np.concatenate([np.asarray(p_n, float), np.asarray(v_n, float)])
    u_n = np.asarray(u_n, dtype=float)
    p = x[:2]
    v = x[2:]
    r2 = float(p @ p)
    if r2 < 1e-24:
        raise PositionSingularityError(0.0)
    a_r, m = radial_tangential(x, u_n, x_n, u_max)
    z = float(lam @ _B @ _W @ x)
    if eps_sgn > 0.0:
        s = math.tanh(z / eps_sgn)
    else:
        s = 1.0 if z > 0.0 else -1.0
    a_t = -s * m
    nu = -z * a_t / (2.0 * (r2 * a_t * a_t + _NU_REG * u_max * u_max))

    u = a_r * p + a_t * (_W @ x)
    xdot = _A @ x + _B @ u

    grad_ar = -(2.0 / r2) * np.array([a_r * p[0], a_r * p[1], v[0], v[1]])
    lam_v = _B.T @ lam
    c1 = float(lam_v @ p)
    cg = c1 + 2.0 * nu * a_r * r2
    c3 = 2.0 * nu * (a_r * a_r + a_t * a_t)
    minus_lamdot = (_A.T @ lam + a_r * (_P.T @ lam_v) + a_t * (_W.T @ lam_v)
                    + cg * grad_ar + c3 * np.array([p[0], p[1], 0.0, 0.0]))
    return xdot, -minus_lamdot, a_t, nu


def hamiltonian(x, lam, a_t, nu, u_n, p_n, v_n, u_max):
    """Adjoined Hamiltonian L(x; lam, a_t, nu) with a_r by its formula and
    a_t, nu held fixed: the central-difference oracle for the costate
    equation (-lamdot = dL/dx)."""
    x = np.asarray(x, dtype=float)
    p = x[:2]
    v = x[2:]
    r2 = float(p @ p)
    a_r = float((np.asarray(u_n, float) @ np.asarray(p_n, float)
                 + np.asarray(v_n, float) @ np.asarray(v_n, float) - v @ v) / r2)
    u = a_r * p + a_t * (_W @ x)
    H = float(lam @ (_A @ x + _B @ u))
    constraint = a_r * a_r * r2 + a_t * a_t * r2 - u_max * u_max
    return H + nu * constraint


def _backward_costate_seed(arc_states, arc_controls, nominal, u_max, dt):
    """Estimate lambda(0) by integrating the adjoint equation backward
    along a given attacked arc (with the arc's own tangential input, not
    the bang law), from lambda(T) set by the terminal deviation. Crude
    (frozen per-step data) but only a warm start."""
    n = len(arc_controls)
    pnT = nominal.states[-1, :2]
    pT = arc_states[-1, :2]
    lam = np.concatenate([-2.0 * (pT - pnT), [0.0, 0.0]])
    for k in range(n - 1, -1, -1):
        x = 0.5 * (arc_states[k] + arc_states[k + 1])
        p, v = x[:2], x[2:]
        r2 = float(p @ p)
        if r2 < 1e-18:
            break
        xn = 0.5 * (nominal.states[k] + nominal.states[k + 1])
        u_n = nominal.controls[k]
        a_r = float((u_n @ xn[:2] + xn[2:] @ xn[2:] - v @ v) / r2)
        a_t = float(arc_controls[k] @ (_W @ arc_states[k])) / max(
            float(arc_states[k, :2] @ arc_states[k, :2]), 1e-18)
        # nu is dropped: the stationarity formula is meaningless along
        # non-extremal arcs and its feedback makes the adjoint explode
        grad_ar = -(2.0 / r2) * np.array([a_r * p[0], a_r * p[1], v[0], v[1]])
        lam_v = _B.T @ lam
        cg = float(lam_v @ p)
        minus_lamdot = (_A.T @ lam + a_r * (_P.T @ lam_v) + a_t * (_W.T @ lam_v)
                        + cg * grad_ar)
        lam = lam - dt * minus_lamdot
        if not np.all(np.isfinite(lam)):
            return None
    return lam


def _rollout(lam0, nominal, u_max, eps, band):
    xs, lams, ars, ats, nus, status, k = _kernels.shoot_attack(
        np.asarray(lam0, float), nominal.states[0], nominal.controls,
        nominal.dt, float(u_max), float(eps), eps <= 0.0, band)
    if status != _kernels.OK:
        raise RuntimeError(f"attack rollout aborted (status {status}) at step {k}")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(lams))):
        raise RuntimeError("attack rollout produced non-finite values")
    return xs, lams, ars, ats, nus


def _z_scale(lams, states):
    z = np.abs(-lams[:, 2] * states[:, 1] + lams[:, 3] * states[:, 0])
    return float(np.percentile(z, 90))


def policy_seeds(nominal: Trajectory, u_max: float):
    """lambda(0) warm starts: for each nonzero built-in policy, roll the
    policy attack and integrate the costate backward along its arc."""
    seeds = []
    for pol in builtin_policies(nominal.T):
        if pol.code == _kernels.POLICY_ZERO:
            continue  # encodes the trivial non-deviating extremal
        try:
            xs, us, ars, wns, status, k = _kernels.coint_attack(
                nominal.states[0], nominal.controls, nominal.dt, float(u_max),
                pol.code, pol.fraction, pol.t_switch, pol.sign, 1e-4)
            if status != _kernels.OK:
                continue
            lam0 = _backward_costate_seed(xs, us, nominal, u_max, nominal.dt)
            if lam0 is not None and np.linalg.norm(lam0) > 1e-12:
                # cap at the physical costate scale (|lam(T)| = 2*deviation):
                # backward integration along non-extremal arcs can blow up
                dev = float(np.linalg.norm(xs[-1, :2] - nominal.states[-1, :2]))
                cap = 4.0 * (1.0 + 2.0 * dev)
                nrm = float(np.linalg.norm(lam0))
                if nrm > cap:
                    lam0 = lam0 * (cap / nrm)
                seeds.append(lam0)
        except (RuntimeError, ValueError):
            continue
    return seeds


def solve_optimal_attack(nominal: Trajectory, u_max: float,
                         cfg: AttackSolverConfig | None = None) -> BvpSolution:
    """Single-shooting solve of the optimal-attack BVP with multi-start
    seeds derived from the built-in tangential policies and a smoothing
    continuation (eps ladder) on the bang law."""
    if nominal.model != DOUBLE_INTEGRATOR:
        raise ValueError("optimal attack applies to the double integrator")
    cfg = cfg or AttackSolverConfig()
    dt = nominal.dt
    pnT = nominal.states[-1, :2]

    seeds = policy_seeds(nominal, u_max)
    seeds.extend(np.asarray(s, float) for s in cfg.extra_seeds)
    if not seeds:
        seeds = [np.zeros(4)]

    def make_residual(eps):
        def residual(lam0):
            xs, lams, *_ = _rollout(lam0, nominal, u_max, eps, cfg.feas_band)
            target = np.concatenate([-2.0 * (xs[-1, :2] - pnT), [0.0, 0.0]])
            return lams[-1] - target
        return residual

    def deviation_of(lam0, eps):
        xs, *_ = _rollout(lam0, nominal, u_max, eps, cfg.feas_band)
        return float(np.linalg.norm(xs[-1, :2] - pnT))

    scale = np.full(4, max(1.0, float(np.linalg.norm(nominal.states[0][:2])) * 4))
    result = None
    eps_used = cfg.eps_ladder[0]
    current_seeds = list(seeds)
    total_iters = 0
    logs = []
    for rung, rel_eps in enumerate(cfg.eps_ladder):
        eps = rel_eps
        prob = shooting.ShootingProblem(
            unknown_dim=4,
            residual=make_residual(eps),
            scale=scale,
            objective=lambda u, eps=eps: deviation_of(u, eps),
        )
        scfg = shooting.SolverConfig(tol=cfg.tol, max_newton=cfg.max_newton,
                                     fd_eps=cfg.fd_eps,
                                     max_backtracks=cfg.max_backtracks,
                                     seeds=current_seeds)
        res = shooting.solve(prob, scfg)
        logs.extend(res.logs)
        total_iters += res.iterations
        nontrivial = res.converged and np.linalg.norm(res.unknowns) / scale[0] > 1e-8
        if nontrivial:
            result = res
            eps_used = eps
            current_seeds = [res.unknowns]  # warm-start the next rung
        elif res.converged and result is None:
            # only the trivial root converged so far: keep trying the
            # original seeds on the sharper rungs
            result = res
            eps_used = eps
        elif result is None:
            result = res
            break

    lam0 = result.unknowns
    if np.linalg.norm(lam0) / scale[0] < 1e-10:
        # trivial extremal: the attack stays on the nominal trajectory
        lam0 = np.zeros(4)
        n = len(nominal.controls)
        xs = nominal.states.copy()
        return BvpSolution(
            attacked=Trajectory(t0=nominal.t0, dt=dt, states=xs,
                                controls=nominal.controls.copy(),
                                model=DOUBLE_INTEGRATOR),
            costate=CostateArc(lam=np.zeros((n + 1, 4)), nu_multiplier=np.zeros(n),
                               a_t=np.zeros(n), a_r=np.zeros(n)),
            attack=AttackSignal(u=nominal.controls.copy(),
                                u_gnss=np.zeros((n + 1, 2))),
            terminal_deviation=0.0,
            converged=result.converged,
            shooting_residual=result.residual_norm,
            iterations=total_iters,
            lam0=lam0,
            eps_sgn=eps_used,
            logs=logs,
        )
    # hard-sgn final rollout (exact bang structure in the report)
    xs, lams, ars, ats, nus = _rollout(lam0, nominal, u_max, 0.0, cfg.feas_band)
    us = np.empty((len(ars), 2))
    us[:, 0] = ars * xs[:-1, 0] - ats * xs[:-1, 1]
    us[:, 1] = ars * xs[:-1, 1] + ats * xs[:-1, 0]
    attacked = Trajectory(t0=nominal.t0, dt=dt, states=xs, controls=us,
                          model=DOUBLE_INTEGRATOR)
    spoof = nominal.states[:, :2] - xs[:, :2]
    deviation = float(np.linalg.norm(xs[-1, :2] - pnT))
    return BvpSolution(
        attacked=attacked,
        costate=CostateArc(lam=lams, nu_multiplier=nus, a_t=ats, a_r=ars),
        attack=AttackSignal(u=us, u_gnss=spoof),
        terminal_deviation=deviation,
        converged=result.converged,
        shooting_residual=result.residual_norm,
        iterations=total_iters,
        lam0=lam0,
        eps_sgn=eps_used,
        logs=logs,
    )


def switch_times(a_t, dt, t0=0.0, frac: float = 0.25, min_len: float = 0.1):
    """Times where the tangential bang changes sign, ignoring chatter.

    A switch is reported at the start of every maximal run where a_t is
    strongly (>= frac * max|a_t|) of one sign for at least min_len
    seconds, when the previous strong run had the opposite sign.
    """
    a_t = np.asarray(a_t, dtype=float)
    peak = float(np.max(np.abs(a_t))) if len(a_t) else 0.0
    if peak == 0.0:
        return []
    strong = np.where(a_t > frac * peak, 1, np.where(a_t < -frac * peak, -1, 0))
    times = []
    run_sign, run_start, last_sign = 0, 0, 0
    k = 0
    n = len(strong)
    min_steps = max(1, int(round(min_len / dt)))
    while k < n:
        s = strong[k]
        if s == 0:
            k += 1
            continue
        j = k
        while j < n and strong[j] == s:
            j += 1
        if j - k >= min_steps:
            if last_sign != 0 and s != last_sign:
                times.append(t0 + k * dt)
            last_sign = s
        k = j
    return times


def sweep_nominal_ratio(ratios, base_nominal_builder, u_max: float,
                        cfg: AttackSolverConfig | None = None):
    """Solve the optimal attack for each ontrol-magnitude ratio.

    base_nominal_builder(ratio) -> nominal Trajectory. Returns a list of
    (ratio, terminal_deviation, converged) rows, in input order.
    """
    rows = []
    for r in ratios:
        if not 0.0 < r <= 1.0:
            raise ValueError(f"ratio must lie in (0, 1], got {r}")
        nominal = base_nominal_builder(r)
        sol = solve_optimal_attack(nominal, u_max, cfg)
        rows.append((float(r), sol.terminal_deviation, sol.converged))
    return rows
