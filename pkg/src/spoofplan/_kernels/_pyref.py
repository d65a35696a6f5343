"""Pure-Python reference kernels for the hot integration loops.

Same signatures as the compiled module ``spoofplan._kernels._fast``; this
module is the fallback selected at import time when the extension is not
built. Inner loops use plain floats on purpose: for 4-12 dimensional
states, per-step numpy dispatch costs more than the arithmetic.

All rollouts are fixed-step RK4. Sampled control signals are
zero-order-hold: constant over their own step, including at the t+dt
stage. State-feedback laws (the undetectable-attack law, the secure
kappa law) are re-evaluated at every RK4 stage so that the conserved
quantities of the exact flow are preserved to O(dt^4).

Status codes: OK, INFEASIBLE (input-bound budget exhausted),
SINGULAR (position at the base station, or cos(phi) ~ 0 for the
unicycle compensation ODE). On failure the returned arrays are valid up
to and including step index ``fail_k``.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

OK = 0
INFEASIBLE = 1
SINGULAR = 2

# Tangential-input policy codes shared with the compiled backend.
POLICY_ZERO = 0
POLICY_FRACTION = 1
POLICY_GREEDY_SWITCH = 2
POLICY_NOMINAL_TANGENTIAL = 3

_R2_MIN = 1e-24  # squared position norm below which the law is singular


def rollout_di(x0, u, dt):
    """Roll the planar double integrator under per-step constant inputs.

    x0: (4,) state [px, py, vx, vy]; u: (n, 2) accelerations; returns
    (n+1, 4) states.
    """
    u = np.asarray(u, dtype=float)
    n = u.shape[0]
    xs = np.empty((n + 1, 4))
    px, py, vx, vy = (float(v) for v in x0)
    xs[0] = (px, py, vx, vy)
    h = float(dt)
    for k in range(n):
        ax = float(u[k, 0])
        ay = float(u[k, 1])
        # RK4 for pdot = v, vdot = a with a constant over the step; this
        # collapses to the exact discrete map.
        k1px, k1py = vx, vy
        k2px, k2py = vx + 0.5 * h * ax, vy + 0.5 * h * ay
        k4px, k4py = vx + h * ax, vy + h * ay
        px += (h / 6.0) * (k1px + 4.0 * k2px + k4px)
        py += (h / 6.0) * (k1py + 4.0 * k2py + k4py)
        vx += h * ax
        vy += h * ay
        xs[k + 1] = (px, py, vx, vy)
    return xs


def rollout_unicycle(s0, nus, oms, dt):
    """Roll unicycle kinematics under per-step constant (nu, omega).

    s0: (3,) [px, py, theta]; returns (n+1, 3) states with theta wrapped
    to [0, 2*pi) after every step.
    """
    nus = np.asarray(nus, dtype=float)
    oms = np.asarray(oms, dtype=float)
    n = nus.shape[0]
    xs = np.empty((n + 1, 3))
    px, py, th = (float(v) for v in s0)
    xs[0] = (px, py, th)
    h = float(dt)
    two_pi = 2.0 * math.pi
    for k in range(n):
        nu = float(nus[k])
        om = float(oms[k])

        c1, s1 = math.cos(th), math.sin(th)
        t2 = th + 0.5 * h * om
        c2, s2 = math.cos(t2), math.sin(t2)
        t4 = th + h * om
        c4, s4 = math.cos(t4), math.sin(t4)

        px += (h / 6.0) * nu * (c1 + 4.0 * c2 + c4)
        py += (h / 6.0) * nu * (s1 + 4.0 * s2 + s4)
        th = (th + h * om) % two_pi
        xs[k + 1] = (px, py, th)
    return xs


def _attack_stage(t, xn, x, unx, uny, umax2, policy, frac, t_switch, sign, band, h):
    """One RHS evaluation of the joint (nominal, attacked) system under
    the undetectable-attack law. Returns (deriv8, a_r, wnorm, status)."""
    pnx, pny, vnx, vny = xn
    px, py, vx, vy = x
    r2 = px * px + py * py
    if r2 < _R2_MIN:
        return None, 0.0, 0.0, SINGULAR
    a_r = (unx * pnx + uny * pny + vnx * vnx + vny * vny - vx * vx - vy * vy) / r2

    if policy == POLICY_NOMINAL_TANGENTIAL:
        # w = tangential component of u_n relative to the attacked position.
        proj = (unx * px + uny * py) / r2
        wx = unx - proj * px
        wy = uny - proj * py
        ux = a_r * px + wx
        uy = a_r * py + wy
        un2 = ux * ux + uy * uy
        if un2 > umax2 * (1.0 + band):
            return None, a_r, math.sqrt(wx * wx + wy * wy), INFEASIBLE
        wnorm = math.sqrt(wx * wx + wy * wy)
    else:
        wmax2 = umax2 - a_r * a_r * r2
        if wmax2 < -band * umax2:
            return None, a_r, 0.0, INFEASIBLE
        if wmax2 >= 0.0:
            wmax = math.sqrt(wmax2)
            if policy == POLICY_ZERO:
                wn = 0.0
            elif policy == POLICY_FRACTION:
                wn = sign * frac * wmax
            else:  # POLICY_GREEDY_SWITCH
                wn = sign * wmax if t < t_switch else -sign * wmax
        elif policy == POLICY_ZERO:
            wn = 0.0
        else:
            # budget overdrawn by discretization: apply the tangential
            # input that shrinks a_r^2 r^2 back under the budget, sized
            # to cancel the overshoot in about one step (critically
            # damped; sign satisfies sign(v.w) * sign(h) = sign(a_r))
            q = -vx * py + vy * px  # tangential velocity component * r
            mag = min(math.sqrt(-wmax2),
                      -wmax2 * math.sqrt(r2) / (4.0 * abs(a_r * q * h) + 1e-300))
            qs = q if a_r > 0.0 else -q
            if h < 0.0:
                qs = -qs
            wn = mag if qs > 0.0 else -mag
        r = math.sqrt(r2)
        # unit tangential direction: rotate p by +90 degrees
        wx = wn * (-py) / r
        wy = wn * px / r
        ux = a_r * px + wx
        uy = a_r * py + wy
        wnorm = abs(wn)

    deriv = (vnx, vny, unx, uny, vx, vy, ux, uy)
    return deriv, a_r, wnorm, OK


def coint_attack(xn0, un, dt, u_max, policy, frac, t_switch, sign, band=1e-2):
    """Co-integrate nominal and attacked dynamics under a built-in
    tangential policy, starting from the shared initial state.

    Returns (xs, us, ar, wnorm, status, fail_k): attacked states
    (n+1, 4), applied attack inputs sampled at step starts (n, 2),
    radial acceleration and tangential magnitude at step starts.
    """
    un = np.asarray(un, dtype=float)
    n = un.shape[0]
    xs = np.empty((n + 1, 4))
    us = np.zeros((n, 2))
    ars = np.zeros(n)
    wns = np.zeros(n)
    xn = tuple(float(v) for v in xn0)
    x = xn
    xs[0] = x
    h = float(dt)
    umax2 = float(u_max) * float(u_max)
    t = 0.0
    for k in range(n):
        unx = float(un[k, 0])
        uny = float(un[k, 1])

        d1, ar0, wn0, st = _attack_stage(t, xn, x, unx, uny, umax2, policy, frac, t_switch, sign, band, h)
        if st != OK:
            return xs, us, ars, wns, st, k
        ars[k] = ar0
        wns[k] = wn0
        us[k, 0] = d1[6]
        us[k, 1] = d1[7]

        y1n = tuple(xn[i] + 0.5 * h * d1[i] for i in range(4))
        y1a = tuple(x[i] + 0.5 * h * d1[4 + i] for i in range(4))
        d2, _, _, st = _attack_stage(t + 0.5 * h, y1n, y1a, unx, uny, umax2, policy, frac, t_switch, sign, band, h)
        if st != OK:
            return xs, us, ars, wns, st, k
        y2n = tuple(xn[i] + 0.5 * h * d2[i] for i in range(4))
        y2a = tuple(x[i] + 0.5 * h * d2[4 + i] for i in range(4))
        d3, _, _, st = _attack_stage(t + 0.5 * h, y2n, y2a, unx, uny, umax2, policy, frac, t_switch, sign, band, h)
        if st != OK:
            return xs, us, ars, wns, st, k
        y3n = tuple(xn[i] + h * d3[i] for i in range(4))
        y3a = tuple(x[i] + h * d3[4 + i] for i in range(4))
        d4, _, _, st = _attack_stage(t + h, y3n, y3a, unx, uny, umax2, policy, frac, t_switch, sign, band, h)
        if st != OK:
            return xs, us, ars, wns, st, k

        xn = tuple(xn[i] + (h / 6.0) * (d1[i] + 2.0 * d2[i] + 2.0 * d3[i] + d4[i]) for i in range(4))
        x = tuple(x[i] + (h / 6.0) * (d1[4 + i] + 2.0 * d2[4 + i] + 2.0 * d3[4 + i] + d4[4 + i]) for i in range(4))
        xs[k + 1] = x
        t += h
    return xs, us, ars, wns, OK, n


def _optattack_stage(xn, x, lam, unx, uny, umax2, eps_sgn, hard, band, h):
    """One RHS evaluation of the (nominal, attacked, costate) system of
    the deviation-maximizing attack BVP.

    Returns (deriv12, a_r, a_t, nu, status).
    """
    pnx, pny, vnx, vny = xn
    px, py, vx, vy = x
    l0, l1, l2, l3 = lam
    r2 = px * px + py * py
    if r2 < _R2_MIN:
        return None, 0.0, 0.0, 0.0, SINGULAR
    a_r = (unx * pnx + uny * pny + vnx * vnx + vny * vny - vx * vx - vy * vy) / r2
    m2 = umax2 / r2 - a_r * a_r
    if m2 < -band * umax2 / r2:
        return None, a_r, 0.0, 0.0, INFEASIBLE

    # switching function of the bang tangential law
    z = -l2 * py + l3 * px
    if hard:
        if m2 >= 0.0:
            s = 1.0 if z > 0.0 else -1.0  # tie -> a_t = +m (counterclockwise)
            a_t = -s * math.sqrt(m2)
        else:
            # budget overdrawn by discretization: tangential input that
            # shrinks a_r^2 r^2 back under the budget in the direction
            # of integration (h < 0 backward), critically damped; the
            # sign satisfies sign(v.w) * sign(h) = sign(a_r)
            q = -vx * py + vy * px
            mag = min(math.sqrt(-m2), -m2 * r2 / (4.0 * abs(a_r * q * h) + 1e-300))
            qs = q if a_r > 0.0 else -q
            if h < 0.0:
                qs = -qs
            a_t = mag if qs > 0.0 else -mag
    else:
        # C1-smooth law for Newton iterations: smooth-clamped bang
        # magnitude plus a smooth critically-damped restoring term that
        # pulls budget-boundary overshoot back in. eps_sgn smooths the
        # sign scale-free (fraction of the largest |z| attainable at this
        # state), so the homotopy is invariant to costate growth.
        kap = 1e-3 * umax2 / r2
        sp = 0.5 * (m2 + math.sqrt(m2 * m2 + kap * kap))
        sm = sp - m2  # smooth max(-m2, 0): the budget violation
        zloc = math.sqrt((l2 * l2 + l3 * l3) * r2)
        s = math.tanh(z / (eps_sgn * zloc)) if zloc > 0.0 else 0.0
        a_t = -s * math.sqrt(sp)
        aq = a_r * (-vx * py + vy * px)
        araw = sm * r2 * aq / (4.0 * h * (aq * aq + 1e-18 * umax2 * umax2))
        acap = math.sqrt(sm) + 1e-300
        a_t += acap * math.tanh(araw / acap)
    # stationarity multiplier, Tikhonov-regularized at bang-magnitude
    # zero and capped at its physical scale: the raw formula explodes on
    # boundary arcs of non-extremal iterates (a_t -> 0 with z != 0) and
    # would blow the costate up; the cap is inactive at true extremals,
    # where z and a_t vanish together.
    zloc2 = (l2 * l2 + l3 * l3) * r2
    nu = -z * a_t / (2.0 * (r2 * a_t * a_t + 1e-18 * umax2))
    ncap = 50.0 * math.sqrt(zloc2 / (r2 * umax2))
    if nu > ncap:
        nu = ncap
    elif nu < -ncap:
        nu = -ncap

    ux = a_r * px - a_t * py
    uy = a_r * py + a_t * px

    # gradient of a_r wrt the attacked state
    gs = -2.0 / r2
    g0 = gs * a_r * px
    g1 = gs * a_r * py
    g2 = gs * vx
    g3 = gs * vy
    c1 = l2 * px + l3 * py  # lambda^T B P x
    cg = c1 + 2.0 * nu * a_r * r2
    c3 = 2.0 * nu * (a_r * a_r + a_t * a_t)

    # -lambda_dot = A^T lam + a_r P~ lam + a_t W~ lam + cg * grad(a_r) + c3 * [p; 0]
    ml0 = a_r * l2 + a_t * l3 + cg * g0 + c3 * px
    ml1 = a_r * l3 - a_t * l2 + cg * g1 + c3 * py
    ml2 = l0 + cg * g2
    ml3 = l1 + cg * g3

    deriv = (vnx, vny, unx, uny, vx, vy, ux, uy, -ml0, -ml1, -ml2, -ml3)
    return deriv, a_r, a_t, nu, OK


def shoot_attack(lam0, xn0, un, dt, u_max, eps_sgn, hard, band=1e-2):
    """Forward rollout of the attack-BVP state/costate system from a
    candidate initial costate.

    Returns (xs, lams, ar, at, nus, status, fail_k).
    """
    un = np.asarray(un, dtype=float)
    n = un.shape[0]
    xs = np.empty((n + 1, 4))
    lams = np.empty((n + 1, 4))
    ars = np.zeros(n)
    ats = np.zeros(n)
    nus = np.zeros(n)
    xn = tuple(float(v) for v in xn0)
    x = xn
    lam = tuple(float(v) for v in lam0)
    xs[0] = x
    lams[0] = lam
    h = float(dt)
    umax2 = float(u_max) * float(u_max)
    for k in range(n):
        unx = float(un[k, 0])
        uny = float(un[k, 1])

        d1, ar0, at0, nu0, st = _optattack_stage(xn, x, lam, unx, uny, umax2, eps_sgn, hard, band, h)
        if st != OK:
            return xs, lams, ars, ats, nus, st, k
        ars[k] = ar0
        ats[k] = at0
        nus[k] = nu0

        y1n = tuple(xn[i] + 0.5 * h * d1[i] for i in range(4))
        y1a = tuple(x[i] + 0.5 * h * d1[4 + i] for i in range(4))
        y1l = tuple(lam[i] + 0.5 * h * d1[8 + i] for i in range(4))
        d2, _, _, _, st = _optattack_stage(y1n, y1a, y1l, unx, uny, umax2, eps_sgn, hard, band, h)
        if st != OK:
            return xs, lams, ars, ats, nus, st, k
        y2n = tuple(xn[i] + 0.5 * h * d2[i] for i in range(4))
        y2a = tuple(x[i] + 0.5 * h * d2[4 + i] for i in range(4))
        y2l = tuple(lam[i] + 0.5 * h * d2[8 + i] for i in range(4))
        d3, _, _, _, st = _optattack_stage(y2n, y2a, y2l, unx, uny, umax2, eps_sgn, hard, band, h)
        if st != OK:
            return xs, lams, ars, ats, nus, st, k
        y3n = tuple(xn[i] + h * d3[i] for i in range(4))
        y3a = tuple(x[i] + h * d3[4 + i] for i in range(4))
        y3l = tuple(lam[i] + h * d3[8 + i] for i in range(4))
        d4, _, _, _, st = _optattack_stage(y3n, y3a, y3l, unx, uny, umax2, eps_sgn, hard, band, h)
        if st != OK:
            return xs, lams, ars, ats, nus, st, k

        xn = tuple(xn[i] + (h / 6.0) * (d1[i] + 2.0 * d2[i] + 2.0 * d3[i] + d4[i]) for i in range(4))
        x = tuple(x[i] + (h / 6.0) * (d1[4 + i] + 2.0 * d2[4 + i] + 2.0 * d3[4 + i] + d4[4 + i]) for i in range(4))
        lam = tuple(lam[i] + (h / 6.0) * (d1[8 + i] + 2.0 * d2[8 + i] + 2.0 * d3[8 + i] + d4[8 + i]) for i in range(4))
        xs[k + 1] = x
        lams[k + 1] = lam
    return xs, lams, ars, ats, nus, OK, n


def shoot_attack_back(q, vT, xnT, un, dt, u_max, eps_sgn, hard, band=1e-2):
    """Backward rollout of the attack-BVP system from terminal data.

    The terminal costate is pinned by the transversality condition:
    lambda(T) = [-2 q, 0] with q = p(T) - p_n(T); the unknowns are q and
    the terminal velocity vT. Arrays are returned in forward time order;
    the boundary residual for shooting is xs[0] - x_n(0).

    Returns (xs, lams, ar, at, nus, status, fail_k).
    """
    un = np.asarray(un, dtype=float)
    n = un.shape[0]
    xs = np.empty((n + 1, 4))
    lams = np.empty((n + 1, 4))
    ars = np.zeros(n)
    ats = np.zeros(n)
    nus = np.zeros(n)
    xn = tuple(float(v) for v in xnT)
    x = (xn[0] + float(q[0]), xn[1] + float(q[1]), float(vT[0]), float(vT[1]))
    lam = (-2.0 * float(q[0]), -2.0 * float(q[1]), 0.0, 0.0)
    xs[n] = x
    lams[n] = lam
    h = -float(dt)
    umax2 = float(u_max) * float(u_max)
    for k in range(n - 1, -1, -1):
        unx = float(un[k, 0])
        uny = float(un[k, 1])

        d1, ar0, at0, nu0, st = _optattack_stage(xn, x, lam, unx, uny, umax2, eps_sgn, hard, band, h)
        if st != OK:
            return xs, lams, ars, ats, nus, st, k
        y1n = tuple(xn[i] + 0.5 * h * d1[i] for i in range(4))
        y1a = tuple(x[i] + 0.5 * h * d1[4 + i] for i in range(4))
        y1l = tuple(lam[i] + 0.5 * h * d1[8 + i] for i in range(4))
        d2, _, _, _, st = _optattack_stage(y1n, y1a, y1l, unx, uny, umax2, eps_sgn, hard, band, h)
        if st != OK:
            return xs, lams, ars, ats, nus, st, k
        y2n = tuple(xn[i] + 0.5 * h * d2[i] for i in range(4))
        y2a = tuple(x[i] + 0.5 * h * d2[4 + i] for i in range(4))
        y2l = tuple(lam[i] + 0.5 * h * d2[8 + i] for i in range(4))
        d3, _, _, _, st = _optattack_stage(y2n, y2a, y2l, unx, uny, umax2, eps_sgn, hard, band, h)
        if st != OK:
            return xs, lams, ars, ats, nus, st, k
        y3n = tuple(xn[i] + h * d3[i] for i in range(4))
        y3a = tuple(x[i] + h * d3[4 + i] for i in range(4))
        y3l = tuple(lam[i] + h * d3[8 + i] for i in range(4))
        d4, _, _, _, st = _optattack_stage(y3n, y3a, y3l, unx, uny, umax2, eps_sgn, hard, band, h)
        if st != OK:
            return xs, lams, ars, ats, nus, st, k

        xn = tuple(xn[i] + (h / 6.0) * (d1[i] + 2.0 * d2[i] + 2.0 * d3[i] + d4[i]) for i in range(4))
        x = tuple(x[i] + (h / 6.0) * (d1[4 + i] + 2.0 * d2[4 + i] + 2.0 * d3[4 + i] + d4[4 + i]) for i in range(4))
        lam = tuple(lam[i] + (h / 6.0) * (d1[8 + i] + 2.0 * d2[8 + i] + 2.0 * d3[8 + i] + d4[8 + i]) for i in range(4))
        xs[k] = x
        lams[k] = lam
        # step-start values of the law at the earlier time point
        d0, ar0, at0, nu0, st = _optattack_stage(xn, x, lam, unx, uny, umax2, eps_sgn, hard, band, h)
        if st != OK:
            return xs, lams, ars, ats, nus, st, k
        ars[k] = ar0
        ats[k] = at0
        nus[k] = nu0
    return xs, lams, ars, ats, nus, OK, 0


def _secure_stage(x, lam, xi, u_max, eps_sgn, hard):
    """RHS of the secure-planning BVP in scaled time. Returns
    (deriv8, kappa, status)."""
    px, py, vx, vy = x
    l0, l1, l2, l3 = lam
    r2 = px * px + py * py
    if r2 < _R2_MIN:
        return None, 0.0, SINGULAR
    r = math.sqrt(r2)
    sw = l2 * px + l3 * py  # lambda^T B p_n
    if hard:
        kap = -1.0 if sw > 0.0 else 1.0  # tie -> kappa = +1
    else:
        kap = -math.tanh(sw / eps_sgn)
    c = kap * u_max / r
    ux = c * px
    uy = c * py

    # (kappa u_max / r^3) * (r^2 I - p p^T) lambda_v, stacked over position
    d = l2 * px + l3 * py
    cg = kap * u_max / (r2 * r)
    g0 = cg * (r2 * l2 - d * px)
    g1 = cg * (r2 * l3 - d * py)

    deriv = (
        xi * vx,
        xi * vy,
        xi * ux,
        xi * uy,
        -xi * g0,
        -xi * g1,
        -xi * l0,
        -xi * l1,
    )
    return deriv, kap, OK


def shoot_secure(lam0, xi, x0, u_max, n, eps_sgn, hard):
    """Forward rollout of the secure-planning state/costate system on the
    normalized horizon tau in [0, 1] with n steps.

    Returns (xs, lams, kappa, status, fail_k).
    """
    xs = np.empty((n + 1, 4))
    lams = np.empty((n + 1, 4))
    kaps = np.zeros(n)
    x = tuple(float(v) for v in x0)
    lam = tuple(float(v) for v in lam0)
    xs[0] = x
    lams[0] = lam
    h = 1.0 / n
    xi = float(xi)
    um = float(u_max)
    for k in range(n):
        d1, kap0, st = _secure_stage(x, lam, xi, um, eps_sgn, hard)
        if st != OK:
            return xs, lams, kaps, st, k
        kaps[k] = 1.0 if kap0 >= 0.0 else -1.0

        y1 = tuple(x[i] + 0.5 * h * d1[i] for i in range(4))
        y1l = tuple(lam[i] + 0.5 * h * d1[4 + i] for i in range(4))
        d2, _, st = _secure_stage(y1, y1l, xi, um, eps_sgn, hard)
        if st != OK:
            return xs, lams, kaps, st, k
        y2 = tuple(x[i] + 0.5 * h * d2[i] for i in range(4))
        y2l = tuple(lam[i] + 0.5 * h * d2[4 + i] for i in range(4))
        d3, _, st = _secure_stage(y2, y2l, xi, um, eps_sgn, hard)
        if st != OK:
            return xs, lams, kaps, st, k
        y3 = tuple(x[i] + h * d3[i] for i in range(4))
        y3l = tuple(lam[i] + h * d3[4 + i] for i in range(4))
        d4, _, st = _secure_stage(y3, y3l, xi, um, eps_sgn, hard)
        if st != OK:
            return xs, lams, kaps, st, k

        x = tuple(x[i] + (h / 6.0) * (d1[i] + 2.0 * d2[i] + 2.0 * d3[i] + d4[i]) for i in range(4))
        lam = tuple(lam[i] + (h / 6.0) * (d1[4 + i] + 2.0 * d2[4 + i] + 2.0 * d3[4 + i] + d4[4 + i]) for i in range(4))
        xs[k + 1] = x
        lams[k + 1] = lam
    return xs, lams, kaps, OK, n


def rollout_secure_kappa(x0, kappa, u_max, dt):
    """Roll the double integrator under the secure law u = kappa_k * u_max
    * p/|p| with kappa constant per step and p taken at each RK4 stage.

    Returns (xs, us, status, fail_k); us holds the step-start inputs.
    """
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[0]
    xs = np.empty((n + 1, 4))
    us = np.zeros((n, 2))
    x = tuple(float(v) for v in x0)
    xs[0] = x
    h = float(dt)
    um = float(u_max)

    def stage(xc, kap):
        px, py, vx, vy = xc
        r2 = px * px + py * py
        if r2 < _R2_MIN:
            return None
        c = kap * um / math.sqrt(r2)
        return (vx, vy, c * px, c * py)

    for k in range(n):
        kap = float(kappa[k])
        d1 = stage(x, kap)
        if d1 is None:
            return xs, us, SINGULAR, k
        us[k, 0] = d1[2]
        us[k, 1] = d1[3]
        y1 = tuple(x[i] + 0.5 * h * d1[i] for i in range(4))
        d2 = stage(y1, kap)
        if d2 is None:
            return xs, us, SINGULAR, k
        y2 = tuple(x[i] + 0.5 * h * d2[i] for i in range(4))
        d3 = stage(y2, kap)
        if d3 is None:
            return xs, us, SINGULAR, k
        y3 = tuple(x[i] + h * d3[i] for i in range(4))
        d4 = stage(y3, kap)
        if d4 is None:
            return xs, us, SINGULAR, k
        x = tuple(x[i] + (h / 6.0) * (d1[i] + 2.0 * d2[i] + 2.0 * d3[i] + d4[i]) for i in range(4))
        xs[k + 1] = x
    return xs, us, OK, n


def _comp_stage(sn, sa, nu, nun, nudotn, omn, om, cos_floor):
    """RHS of the joint unicycle compensation system (nominal, attacked,
    attacked wheel speed). Returns (deriv7, status)."""
    pnx, pny, thn = sn
    px, py, th = sa
    rn2 = pnx * pnx + pny * pny
    r2 = px * px + py * py
    if rn2 < _R2_MIN or r2 < _R2_MIN:
        return None, SINGULAR
    rn = math.sqrt(rn2)
    r = math.sqrt(r2)

    hnx, hny = math.cos(thn), math.sin(thn)
    hx, hy = math.cos(th), math.sin(th)
    # signed bearing from position ray to heading: cos = p_hat . h,
    # sin = cross(p_hat, h)
    cphin = (pnx * hnx + pny * hny) / rn
    sphin = (pnx * hny - pny * hnx) / rn
    cphi = (px * hx + py * hy) / r
    sphi = (px * hy - py * hx) / r
    if abs(cphi) < cos_floor:
        return None, SINGULAR

    phidn = omn - nun * sphin / rn
    phid = om - nu * sphi / r
    nudot = (nudotn * cphin - nun * phidn * sphin + nu * phid * sphi) / cphi

    deriv = (nun * hnx, nun * hny, omn, nu * hx, nu * hy, om, nudot)
    return deriv, OK


def coint_unicycle_comp(sn0, nun, nudotn, omn, om, dt, nu_max, cos_floor=1e-6):
    """Co-integrate a nominal unicycle and an attacked unicycle whose
    wheel speed follows the compensation ODE that keeps nu*cos(phi)
    matched to the nominal value.

    Inputs nun/nudotn/omn/om are per-step constants. Returns
    (attacked states (n+1, 3), attacked nu (n+1,), status, fail_k).
    """
    nun = np.asarray(nun, dtype=float)
    nudotn = np.asarray(nudotn, dtype=float)
    omn = np.asarray(omn, dtype=float)
    om = np.asarray(om, dtype=float)
    n = nun.shape[0]
    xs = np.empty((n + 1, 3))
    nus = np.empty(n + 1)
    sn = tuple(float(v) for v in sn0)
    sa = sn
    nu = float(nun[0])
    xs[0] = sa
    nus[0] = nu
    h = float(dt)
    two_pi = 2.0 * math.pi
    for k in range(n):
        a0 = float(nun[k])
        a1 = float(nudotn[k])
        a2 = float(omn[k])
        a3 = float(om[k])

        d1, st = _comp_stage(sn, sa, nu, a0, a1, a2, a3, cos_floor)
        if st != OK:
            return xs, nus, st, k
        y1n = tuple(sn[i] + 0.5 * h * d1[i] for i in range(3))
        y1a = tuple(sa[i] + 0.5 * h * d1[3 + i] for i in range(3))
        y1u = nu + 0.5 * h * d1[6]
        nmid = a0 + 0.5 * h * a1
        d2, st = _comp_stage(y1n, y1a, y1u, nmid, a1, a2, a3, cos_floor)
        if st != OK:
            return xs, nus, st, k
        y2n = tuple(sn[i] + 0.5 * h * d2[i] for i in range(3))
        y2a = tuple(sa[i] + 0.5 * h * d2[3 + i] for i in range(3))
        y2u = nu + 0.5 * h * d2[6]
        d3, st = _comp_stage(y2n, y2a, y2u, nmid, a1, a2, a3, cos_floor)
        if st != OK:
            return xs, nus, st, k
        y3n = tuple(sn[i] + h * d3[i] for i in range(3))
        y3a = tuple(sa[i] + h * d3[3 + i] for i in range(3))
        y3u = nu + h * d3[6]
        nend = a0 + h * a1
        d4, st = _comp_stage(y3n, y3a, y3u, nend, a1, a2, a3, cos_floor)
        if st != OK:
            return xs, nus, st, k

        sn = (
            sn[0] + (h / 6.0) * (d1[0] + 2.0 * d2[0] + 2.0 * d3[0] + d4[0]),
            sn[1] + (h / 6.0) * (d1[1] + 2.0 * d2[1] + 2.0 * d3[1] + d4[1]),
            (sn[2] + (h / 6.0) * (d1[2] + 2.0 * d2[2] + 2.0 * d3[2] + d4[2])) % two_pi,
        )
        sa = (
            sa[0] + (h / 6.0) * (d1[3] + 2.0 * d2[3] + 2.0 * d3[3] + d4[3]),
            sa[1] + (h / 6.0) * (d1[4] + 2.0 * d2[4] + 2.0 * d3[4] + d4[4]),
            (sa[2] + (h / 6.0) * (d1[5] + 2.0 * d2[5] + 2.0 * d3[5] + d4[5])) % two_pi,
        )
        nu = nu + (h / 6.0) * (d1[6] + 2.0 * d2[6] + 2.0 * d3[6] + d4[6])
        if nu < -1e-12 or nu > float(nu_max) * (1.0 + 1e-9):
            xs[k + 1] = sa
            nus[k + 1] = nu
            return xs, nus, INFEASIBLE, k
        xs[k + 1] = sa
        nus[k + 1] = nu
    return xs, nus, OK, n
