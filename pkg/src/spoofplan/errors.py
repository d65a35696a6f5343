"""Exception types shared across the package."""

from __future__ import annotations


class SpoofplanError(Exception):
    """Base class for all package errors."""


class ConfigError(SpoofplanError):
    """Invalid scenario configuration; message names the offending field."""


class GridMismatchError(SpoofplanError):
    """Two trajectories do not share t0, dt and length."""


class PositionSingularityError(SpoofplanError):
    """The undetectable-attack law hit |p| = 0, where the input is
    unconstrained and the caller must supply an explicit choice."""

    def __init__(self, time: float, message: str | None = None):
        self.time = time
        super().__init__(message or f"position reached the base station at t={time:.6g}; "
                                    "the attack input is unconstrained there")


class FeasibilityError(SpoofplanError):
    """The input bound cannot be met: a_r^2 |p|^2 exceeds u_max^2."""

    def __init__(self, time: float, w_max: float = 0.0, message: str | None = None):
        self.time = time
        self.w_max = w_max
        super().__init__(
            message
            or f"attack infeasible at t={time:.6g}: radial demand exhausts the input "
               f"budget (max feasible |w| = {w_max:.6g})")


class BearingSingularityError(SpoofplanError):
    """cos(phi) crossed zero during the wheel-speed compensation ODE; the
    construction genuinely breaks there."""

    def __init__(self, time: float):
        self.time = time
        super().__init__(f"compensation ODE singular (cos(phi) ~ 0) at t={time:.6g}")


class SecureInputError(SpoofplanError):
    """A violating attack was requested for an input that is secure."""
