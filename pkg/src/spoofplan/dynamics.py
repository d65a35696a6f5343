"""State types and forward integration for both robot models.

The planar double integrator pdot = v, vdot = u and the unicycle
pdot = nu*(cos theta, sin theta), thetadot = omega, both integrated with
fixed-step RK4. States flatten as x = [p_x, p_y, v_x, v_y] everywhere.

Control signals may be callables of time (sampled at the RK4 stage
nodes) or per-step sample arrays (zero-order hold, constant across their
own step). Bounds are checked, never silently clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError, GridMismatchError

DOUBLE_INTEGRATOR = "double_integrator"
UNICYCLE = "unicycle"

#: Default number of integration steps over a horizon when dt is not given.
DEFAULT_STEPS = 2000

_TWO_PI = 2.0 * math.pi


def _as_vec2(v, name):
    a = np.asarray(v, dtype=float).reshape(-1)
    if a.shape != (2,):
        raise ConfigError(f"{name} must be a 2-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ConfigError(f"{name} must be finite, got {a}")
    return a


@dataclass(frozen=True)
class RobotState:
    """Planar double-integrator state: position p (m), velocity v (m/s)."""

    p: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", _as_vec2(self.p, "p"))
        object.__setattr__(self, "v", _as_vec2(self.v, "v"))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.p, self.v])

    @classmethod
    def from_array(cls, x) -> "RobotState":
        x = np.asarray(x, dtype=float).reshape(-1)
        return cls(p=x[:2], v=x[2:4])


@dataclass(frozen=True)
class UnicycleState:
    """Unicycle state: position p (m), heading theta in [0, 2*pi) (rad)."""

    p: np.ndarray
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "p", _as_vec2(self.p, "p"))
        th = float(self.theta)
        if not math.isfinite(th):
            raise ConfigError(f"theta must be finite, got {th}")
        object.__setattr__(self, "theta", th % _TWO_PI)

    def as_array(self) -> np.ndarray:
        return np.array([self.p[0], self.p[1], self.theta])

    @classmethod
    def from_array(cls, x) -> "UnicycleState":
        x = np.asarray(x, dtype=float).reshape(-1)
        return cls(p=x[:2], theta=float(x[2]))


@dataclass
class Trajectory:
    """Uniformly sampled trajectory plus the control signal that made it.

    states: (n+1, d) samples; controls: (n, m) per-step samples
    (zero-order hold). d = 4 for the double integrator, 3 for the
    unicycle (m = 2 in both cases: [u_x, u_y] or [nu, omega]).
    """

    t0: float
    dt: float
    states: np.ndarray
    controls: np.ndarray
    model: str = DOUBLE_INTEGRATOR

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.controls = np.asarray(self.controls, dtype=float)
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.states.ndim != 2 or self.controls.ndim != 2:
            raise ConfigError("states and controls must be 2-D sample arrays")
        if len(self.states) != len(self.controls) + 1:
            raise ConfigError(
                f"need len(states) == len(controls) + 1, got "
                f"{len(self.states)} vs {len(self.controls)}")

    @property
    def n_steps(self) -> int:
        return len(self.controls)

    @property
    def T(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.states))

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, :2]

    @property
    def velocities(self) -> np.ndarray:
        if self.model != DOUBLE_INTEGRATOR:
            raise ConfigError("velocities are stored only for the double integrator")
        return self.states[:, 2:4]


def same_grid(a: Trajectory, b: Trajectory, check_model: bool = True) -> None:
    """Raise GridMismatchError unless a and b share t0, dt and length."""
    if len(a.states) != len(b.states):
        raise GridMismatchError(
            f"sample counts differ: {len(a.states)} vs {len(b.states)}")
    if abs(a.t0 - b.t0) > 1e-12 or abs(a.dt - b.dt) > 1e-15 * max(1.0, a.dt):
        raise GridMismatchError(
            f"grids differ: t0 {a.t0} vs {b.t0}, dt {a.dt} vs {b.dt}")
    if check_model and a.model != b.model:
        raise GridMismatchError(f"models differ: {a.model} vs {b.model}")


def _check_finite_control(u, t):
    if not (math.isfinite(u[0]) and math.isfinite(u[1])):
        raise ConfigError(f"non-finite control sample at t={t:.6g}: {u}")


def step_double_integrator(x: RobotState, u, dt: float) -> RobotState:
    """One RK4 step of pdot = v, vdot = u with u constant over the step.

    Exact for the double integrator: equals p + v*dt + u*dt^2/2,
    v + u*dt up to rounding.
    """
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    u = _as_vec2(u, "u")
    xs = _kernels.rollout_di(x.as_array(), u.reshape(1, 2), float(dt))
    return RobotState.from_array(xs[1])


def step_unicycle(s: UnicycleState, nu: float, omega: float, dt: float) -> UnicycleState:
    """One RK4 step of the unicycle kinematics; theta is renormalized."""
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    if nu < 0:
        raise ConfigError(f"wheel speed must be non-negative, got {nu}")
    if not (math.isfinite(nu) and math.isfinite(omega)):
        raise ConfigError(f"non-finite control ({nu}, {omega})")
    xs = _kernels.rollout_unicycle(s.as_array(), np.array([nu]), np.array([omega]), float(dt))
    return UnicycleState.from_array(xs[1])


def _control_evaluator(control, n, dt, t0):
    """Normalize a control signal to a callable of absolute time.

    Arrays are zero-order hold on the step grid; callables are used as
    given (and get sampled at RK4 stage nodes).
    """
    if callable(control):
        return control, False
    arr = np.asarray(control, dtype=float)
    if arr.ndim == 1 and arr.shape[0] == 2:
        const = arr.copy()
        return (lambda t: const), False
    if arr.ndim != 2 or arr.shape[0] != n:
        raise ConfigError(
            f"sampled control must have shape ({n}, m), got {arr.shape}")

    def eval_zoh(t):
        k = int(min(max((t - t0) / dt, 0.0), n - 1))
        return arr[k]

    return eval_zoh, True


def _steps_for(T, dt):
    if T <= 0:
        raise ConfigError(f"horizon T must be positive, got {T}")
    if dt is None:
        dt = T / DEFAULT_STEPS
    if not 0 < dt <= T:
        raise ConfigError(f"need 0 < dt <= T, got dt={dt}, T={T}")
    n = int(math.ceil(T / dt - 1e-12))
    return n, dt


def simulate(model, x0, control, T, dt=None, *, u_max=None, nu_max=None,
             omega_max=None, t0=0.0) -> Trajectory:
    """Roll out a model under a control signal over [t0, t0 + T].

    Every per-step control sample is checked against the model bound
    (u_max, or nu_max/omega_max); a violation raises FeasibilityError-free
    ConfigError naming the violation time rather than clamping.
    """
    n, dt = _steps_for(T, dt)
    if model == DOUBLE_INTEGRATOR:
        x0 = x0 if isinstance(x0, RobotState) else RobotState.from_array(np.asarray(x0, dtype=float))
        ev, is_sampled = _control_evaluator(control, n, dt, t0)
        us = np.empty((n, 2))
        for k in range(n):
            u = np.asarray(ev(t0 + k * dt), dtype=float).reshape(-1)
            _check_finite_control(u, t0 + k * dt)
            if u_max is not None and math.hypot(u[0], u[1]) > u_max * (1.0 + 1e-9):
                raise ConfigError(
                    f"control bound violated at t={t0 + k * dt:.6g}: "
                    f"|u|={math.hypot(u[0], u[1]):.6g} > u_max={u_max:.6g}")
            us[k] = u
        if is_sampled or not callable(control):
            states = _kernels.rollout_di(x0.as_array(), us, dt)
        else:
            states = _rollout_di_callable(x0.as_array(), ev, n, dt, t0)
        return Trajectory(t0=t0, dt=dt, states=states, controls=us, model=model)
    if model == UNICYCLE:
        s0 = x0 if isinstance(x0, UnicycleState) else UnicycleState.from_array(np.asarray(x0, dtype=float))
        ev, is_sampled = _control_evaluator(control, n, dt, t0)
        cs = np.empty((n, 2))
        for k in range(n):
            c = np.asarray(ev(t0 + k * dt), dtype=float).reshape(-1)
            _check_finite_control(c, t0 + k * dt)
            if c[0] < 0:
                raise ConfigError(f"negative wheel speed at t={t0 + k * dt:.6g}: {c[0]:.6g}")
            if nu_max is not None and c[0] > nu_max * (1.0 + 1e-9):
                raise ConfigError(
                    f"control bound violated at t={t0 + k * dt:.6g}: "
                    f"nu={c[0]:.6g} > nu_max={nu_max:.6g}")
            if omega_max is not None and abs(c[1]) > omega_max * (1.0 + 1e-9):
                raise ConfigError(
                    f"control bound violated at t={t0 + k * dt:.6g}: "
                    f"|omega|={abs(c[1]):.6g} > omega_max={omega_max:.6g}")
            cs[k] = c
        if is_sampled or not callable(control):
            states = _kernels.rollout_unicycle(s0.as_array(), cs[:, 0], cs[:, 1], dt)
        else:
            states = _rollout_unicycle_callable(s0.as_array(), ev, n, dt, t0)
        return Trajectory(t0=t0, dt=dt, states=states, controls=cs, model=model)
    raise ConfigError(f"unknown model {model!r}")


def _rollout_di_callable(x0, ev, n, dt, t0):
    """RK4 with the control sampled at stage nodes (smooth signals)."""
    xs = np.empty((n + 1, 4))
    x = x0.astype(float)
    xs[0] = x
    for k in range(n):
        t = t0 + k * dt
        u1 = np.asarray(ev(t), dtype=float)
        um = np.asarray(ev(t + 0.5 * dt), dtype=float)
        u4 = np.asarray(ev(t + dt), dtype=float)
        p, v = x[:2], x[2:]
        k1p, k1v = v, u1
        k2p, k2v = v + 0.5 * dt * k1v, um
        k3p, k3v = v + 0.5 * dt * k2v, um
        k4p, k4v = v + dt * k3v, u4
        x = np.concatenate([
            p + (dt / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p),
            v + (dt / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v),
        ])
        xs[k + 1] = x
    return xs


def _rollout_unicycle_callable(s0, ev, n, dt, t0):
    xs = np.empty((n + 1, 3))
    x = s0.astype(float)
    xs[0] = x
    for k in range(n):
        t = t0 + k * dt

        def rhs(state, tt):
            nu, om = np.asarray(ev(tt), dtype=float)
            return np.array([nu * math.cos(state[2]), nu * math.sin(state[2]), om])

        k1 = rhs(x, t)
        k2 = rhs(x + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = rhs(x + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = rhs(x + dt * k3, t + dt)
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        x[2] %= _TWO_PI
        xs[k + 1] = x
    return xs


def constant_accel_states(x0, u, T, dt=None, t0=0.0) -> Trajectory:
    """Convenience: exact rollout under a constant acceleration vector."""
    u = _as_vec2(u, "u")
    n, dt = _steps_for(T, dt)
    x0 = x0 if isinstance(x0, RobotState) else RobotState.from_array(np.asarray(x0, dtype=float))
    us = np.tile(u, (n, 1))
    states = _kernels.rollout_di(x0.as_array(), us, dt)
    return Trajectory(t0=t0, dt=dt, states=states, controls=us, model=DOUBLE_INTEGRATOR)


def integration_error_estimate(traj: Trajectory) -> float:
    """Re-roll a trajectory at dt/2 (controls repeated) and return the
    max position discrepancy on the common samples. Used to size the
    detection tolerances, since the sensors are noiseless and thresholds
    exist only to absorb discretization error."""
    if traj.model == DOUBLE_INTEGRATOR:
        half_u = np.repeat(traj.controls, 2, axis=0)
        fine = _kernels.rollout_di(traj.states[0], half_u, traj.dt / 2.0)
    else:
        nus = np.repeat(traj.controls[:, 0], 2)
        oms = np.repeat(traj.controls[:, 1], 2)
        fine = _kernels.rollout_unicycle(traj.states[0], nus, oms, traj.dt / 2.0)
    diff = traj.states[:, :2] - fine[::2, :2]
    return float(np.max(np.linalg.norm(diff, axis=1)))
