"""Closed-form construction and verification of undetectable attacks.

Undetectable attacks on the double integrator decompose as
u = a_r * p + w with w^T p = 0, where the radial acceleration

    a_r = (u_n^T p_n + |v_n|^2 - |v|^2) / |p|^2

is pinned by undetectability and the tangential input w is the
attacker's free choice. The GNSS spoof is always u_gnss = p_n - p.
Co-integrating the attacked dynamics under this law preserves the
undetectable-trajectory identities p^T p = p_n^T p_n and
v^T p = v_n^T p_n to integration accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dynamics import DOUBLE_INTEGRATOR, Trajectory, same_grid
from .errors import FeasibilityError, PositionSingularityError

_FEAS_MARGIN = 1e-9  # relative slack before the budget square root


@dataclass
class AttackSignal:
    """Attacked acceleration u (n, 2) and GNSS spoof u_gnss (n+1, 2)."""

    u: np.ndarray
    u_gnss: np.ndarray


@dataclass(frozen=True)
class VerificationReport:
    ok: bool
    max_range_residual: float       # max |p^T p - p_n^T p_n|
    max_radial_vel_residual: float  # max |v^T p - v_n^T p_n|
    tol: float


def radial_acceleration(u_n, p_n, v_n, p, v) -> float:
    """Radial acceleration pinned by undetectability (singular at |p|=0)."""
    p = np.asarray(p, dtype=float)
    r2 = float(p @ p)
    if r2 < 1e-24:
        raise PositionSingularityError(0.0)
    u_n = np.asarray(u_n, dtype=float)
    p_n = np.asarray(p_n, dtype=float)
    v_n = np.asarray(v_n, dtype=float)
    v = np.asarray(v, dtype=float)
    return float((u_n @ p_n + v_n @ v_n - v @ v) / r2)


def tangential_budget(a_r: float, p, u_max: float) -> float:
    """Maximal feasible |w| = sqrt(u_max^2 - a_r^2 |p|^2), with a small
    margin before the square root to avoid NaN at the bang boundary."""
    r2 = float(np.asarray(p, dtype=float) @ np.asarray(p, dtype=float))
    arg = u_max * u_max - a_r * a_r * r2
    if arg < -_FEAS_MARGIN * u_max * u_max:
        return -1.0
    return math.sqrt(max(arg, 0.0))


class WPolicy:
    """Built-in tangential policy, dispatchable to the compiled kernel.

    Callable as policy(t, x, x_n, u_n, u_max) -> w (2,) for the generic
    (pure Python) co-integration path.
    """

    def __init__(self, code, fraction=0.0, t_switch=0.0, sign=1.0, name=""):
        self.code = code
        self.fraction = float(fraction)
        self.t_switch = float(t_switch)
        self.sign = float(sign)
        self.name = name or f"policy{code}"

    def __call__(self, t, x, x_n, u_n, u_max):
        p = np.asarray(x[:2], dtype=float)
        r2 = float(p @ p)
        if r2 < 1e-24:
            raise PositionSingularityError(t)
        if self.code == _kernels.POLICY_NOMINAL_TANGENTIAL:
            u_n = np.asarray(u_n, dtype=float)
            return u_n - (float(u_n @ p) / r2) * p
        a_r = radial_acceleration(u_n, x_n[:2], x_n[2:4], p, x[2:4])
        wmax = tangential_budget(a_r, p, u_max)
        if wmax < 0:
            raise FeasibilityError(t, 0.0)
        if self.code == _kernels.POLICY_ZERO:
            mag = 0.0
        elif self.code == _kernels.POLICY_FRACTION:
            mag = self.sign * self.fraction * wmax
        else:
            mag = self.sign * wmax if t < self.t_switch else -self.sign * wmax
        r = math.sqrt(r2)
        return np.array([-p[1], p[0]]) * (mag / r)

    def __repr__(self):
        return f"WPolicy({self.name})"


def zero_policy() -> WPolicy:
    """w = 0: pure radial attack (reproduces the nominal when u_n is radial)."""
    return WPolicy(_kernels.POLICY_ZERO, name="zero")


def fraction_policy(fraction: float, direction: int = 1) -> WPolicy:
    """w = direction * fraction * (budget) tangentially; direction +1 is
    counterclockwise (rotate p by +90 deg), -1 clockwise."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    return WPolicy(_kernels.POLICY_FRACTION, fraction=fraction, sign=float(direction),
                   name=f"fraction{fraction:+.2f}x{direction:+d}")


def greedy_switch_policy(t_switch: float, direction: int = 1) -> WPolicy:
    """Full tangential budget with a single sign switch at t_switch."""
    return WPolicy(_kernels.POLICY_GREEDY_SWITCH, t_switch=t_switch, sign=float(direction),
                   name=f"greedy@{t_switch:.3f}x{direction:+d}")


def nominal_tangential_policy() -> WPolicy:
    """w = tangential part of u_n: reproduces the nominal trajectory from
    matched initial states on any nominal input."""
    return WPolicy(_kernels.POLICY_NOMINAL_TANGENTIAL, name="nominal_tangential")


def builtin_policies(T: float):
    """The stock policy set (also the optimizer's warm-start family)."""
    return [
        zero_policy(),
        fraction_policy(0.5, +1),
        fraction_policy(0.5, -1),
        greedy_switch_policy(0.7 * T, +1),
        greedy_switch_policy(0.7 * T, -1),
    ]


def undetectable_attack(nominal: Trajectory, w_policy, u_max: float):
    """Co-integrate the attacked dynamics under the tangential policy.

    Returns (attacked Trajectory, AttackSignal). The spoof is
    u_gnss = p_n - p per sample. Raises FeasibilityError when the radial
    demand exhausts the budget and PositionSingularityError at |p| = 0.
    """
    if nominal.model != DOUBLE_INTEGRATOR:
        raise ValueError("undetectable_attack applies to the double integrator")
    if isinstance(w_policy, WPolicy):
        xs, us, ars, wns, status, k = _kernels.coint_attack(
            nominal.states[0], nominal.controls, nominal.dt, float(u_max),
            w_policy.code, w_policy.fraction, w_policy.t_switch - nominal.t0,
            w_policy.sign, 1e-2)
        if status == _kernels.SINGULAR:
            raise PositionSingularityError(nominal.t0 + k * nominal.dt)
        if status == _kernels.INFEASIBLE:
            wmax = tangential_budget(ars[k], xs[k, :2], u_max)
            raise FeasibilityError(nominal.t0 + k * nominal.dt, max(wmax, 0.0))
    else:
        xs, us = _coint_attack_generic(nominal, w_policy, u_max)
    attacked = Trajectory(t0=nominal.t0, dt=nominal.dt, states=xs, controls=us,
                          model=DOUBLE_INTEGRATOR)
    spoof = nominal.states[:, :2] - xs[:, :2]
    return attacked, AttackSignal(u=us, u_gnss=spoof)


def _coint_attack_generic(nominal: Trajectory, policy, u_max: float):
    """Pure-Python co-integration for arbitrary policy callables; the law
    (a_r and w) is re-evaluated at every RK4 stage."""
    un = nominal.controls
    n = len(un)
    dt = nominal.dt
    xs = np.empty((n + 1, 4))
    us = np.empty((n, 2))
    xn = nominal.states[0].astype(float)
    x = xn.copy()
    xs[0] = x

    def law(t, xnc, xc, u_n):
        p, v = xc[:2], xc[2:]
        r2 = float(p @ p)
        if r2 < 1e-24:
            raise PositionSingularityError(t)
        a_r = radial_acceleration(u_n, xnc[:2], xnc[2:], p, v)
        w = np.asarray(policy(t, xc, xnc, u_n, u_max), dtype=float)
        if abs(w @ p) > 1e-9 * (1.0 + float(np.linalg.norm(w)) * math.sqrt(r2)):
            raise ValueError(f"policy returned non-tangential w at t={t:.6g}")
        u = a_r * p + w
        if float(u @ u) > u_max * u_max * (1.0 + _FEAS_MARGIN):
            wmax = tangential_budget(a_r, p, u_max)
            raise FeasibilityError(t, max(wmax, 0.0))
        return u

    def rhs(t, xnc, xc, u_n):
        u = law(t, xnc, xc, u_n)
        return (np.concatenate([xnc[2:], u_n]), np.concatenate([xc[2:], u]), u)

    for k in range(n):
        t = nominal.t0 + k * dt
        u_n = un[k]
        d1n, d1a, u0 = rhs(t, xn, x, u_n)
        us[k] = u0
        d2n, d2a, _ = rhs(t + 0.5 * dt, xn + 0.5 * dt * d1n, x + 0.5 * dt * d1a, u_n)
        d3n, d3a, _ = rhs(t + 0.5 * dt, xn + 0.5 * dt * d2n, x + 0.5 * dt * d2a, u_n)
        d4n, d4a, _ = rhs(t + dt, xn + dt * d3n, x + dt * d3a, u_n)
        xn = xn + (dt / 6.0) * (d1n + 2 * d2n + 2 * d3n + d4n)
        x = x + (dt / 6.0) * (d1a + 2 * d2a + 2 * d3a + d4a)
        xs[k + 1] = x
    return xs, us


def verify_undetectable(nominal: Trajectory, attacked: Trajectory,
                        tol: float | None = None) -> VerificationReport:
    """Check both undetectable-trajectory identities pointwise:
    p^T p = p_n^T p_n and v^T p = v_n^T p_n."""
    same_grid(nominal, attacked)
    pn, vn = nominal.states[:, :2], nominal.states[:, 2:4]
    pa, va = attacked.states[:, :2], attacked.states[:, 2:4]
    range_res = np.abs(np.einsum("ij,ij->i", pa, pa) - np.einsum("ij,ij->i", pn, pn))
    radial_res = np.abs(np.einsum("ij,ij->i", va, pa) - np.einsum("ij,ij->i", vn, pn))
    if tol is None:
        scale = 1.0 + float(np.max(np.einsum("ij,ij->i", pn, pn)))
        tol = 1e-8 * scale
    ok = bool(range_res.max() <= tol and radial_res.max() <= tol)
    return VerificationReport(ok=ok,
                              max_range_residual=float(range_res.max()),
                              max_radial_vel_residual=float(radial_res.max()),
                              tol=float(tol))
