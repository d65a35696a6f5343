"""GNSS and RSSI measurement models and the residual detectability monitor.

GNSS reads absolute position and can be spoofed additively; RSSI reads
p^T p against a base station at the origin and cannot be spoofed. An
attack is undetectable when both measurement streams match the nominal
ones at every sample; the monitor flags the first sample where either
residual exceeds its tolerance. Sensors are noiseless, so tolerances
exist only to absorb integration error (sampled instants only;
inter-sample violations are invisible -- a documented limitation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory, integration_error_estimate, same_grid
from .errors import ConfigError

#: Multiple of the integration-error estimate used for default tolerances.
DEFAULT_TOL_FACTOR = 10.0

#: Absolute floor so exact rollouts (zero estimate) keep a nonzero band.
_TOL_FLOOR = 1e-12


@dataclass(frozen=True)
class SensorReading:
    """One joint sensor sample: y_gnss (m, spoofable), y_rssi (m^2)."""

    y_gnss: np.ndarray
    y_rssi: float


@dataclass(frozen=True)
class DetectionReport:
    detected: bool
    first_violation_time: float | None
    max_gnss_residual: float
    max_rssi_residual: float
    tol_gnss: float
    tol_rssi: float
    #: factor applied to the integration-error estimate when the
    #: tolerances were defaulted; None when they were given explicitly.
    tol_factor: float | None = None

    def __post_init__(self):
        if self.detected != (self.first_violation_time is not None):
            raise ValueError("detected must match presence of first_violation_time")


def measure(p, u_gnss=None) -> SensorReading:
    """Sensor model: y_gnss = p + u_gnss, y_rssi = p^T p."""
    p = np.asarray(p, dtype=float).reshape(2)
    if u_gnss is None:
        y = p.copy()
    else:
        u_gnss = np.asarray(u_gnss, dtype=float).reshape(2)
        if not np.all(np.isfinite(u_gnss)):
            raise ConfigError(f"non-finite spoof signal {u_gnss}")
        y = p + u_gnss
    if not np.all(np.isfinite(p)):
        raise ConfigError(f"non-finite position {p}")
    return SensorReading(y_gnss=y, y_rssi=float(p @ p))


def default_tolerances(nominal: Trajectory, factor: float = DEFAULT_TOL_FACTOR):
    """Size (tol_gnss, tol_rssi) from a dt vs dt/2 rollout comparison."""
    est = integration_error_estimate(nominal)
    scale = 1.0 + float(np.max(np.abs(nominal.states[:, :2])))
    tol_gnss = max(factor * est, _TOL_FLOOR * scale)
    # RSSI residual is quadratic in position: scale the band accordingly
    tol_rssi = max(factor * est * 2.0 * scale, _TOL_FLOOR * scale * scale)
    return tol_gnss, tol_rssi


def detect(nominal: Trajectory, attacked: Trajectory, spoof=None,
           tol_gnss: float | None = None, tol_rssi: float | None = None) -> DetectionReport:
    """Compare the attacked measurement streams against the nominal ones.

    spoof: (n+1, 2) GNSS offset per sample, or None for no spoofing.
    detected iff some sample violates |y_gnss - y_gnss_n| > tol_gnss or
    |y_rssi - y_rssi_n| > tol_rssi.
    """
    same_grid(nominal, attacked)
    pn = nominal.states[:, :2]
    pa = attacked.states[:, :2]
    if spoof is None:
        spoof_arr = np.zeros_like(pa)
    else:
        spoof_arr = np.asarray(spoof, dtype=float)
        if spoof_arr.shape != pa.shape:
            raise ConfigError(
                f"spoof signal must have shape {pa.shape}, got {spoof_arr.shape}")

    factor = None
    if tol_gnss is None or tol_rssi is None:
        tg, tr = default_tolerances(nominal)
        tol_gnss = tg if tol_gnss is None else tol_gnss
        tol_rssi = tr if tol_rssi is None else tol_rssi
        factor = DEFAULT_TOL_FACTOR

    gnss_res = np.linalg.norm(pa + spoof_arr - pn, axis=1)
    rssi_res = np.abs(np.einsum("ij,ij->i", pa, pa) - np.einsum("ij,ij->i", pn, pn))

    bad = (gnss_res > tol_gnss) | (rssi_res > tol_rssi)
    if bad.any():
        k = int(np.argmax(bad))
        first_t = float(nominal.t0 + k * nominal.dt)
        detected = True
    else:
        first_t = None
        detected = False
    return DetectionReport(
        detected=detected,
        first_violation_time=first_t,
        max_gnss_residual=float(gnss_res.max()),
        max_rssi_residual=float(rssi_res.max()),
        tol_gnss=float(tol_gnss),
        tol_rssi=float(tol_rssi),
        tol_factor=factor,
    )
