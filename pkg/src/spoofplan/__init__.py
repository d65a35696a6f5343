"""Secure trajectory planning against undetectable GNSS-spoofing attacks.

Library + CLI for planar robots (double integrator, unicycle) with GNSS
and RSSI sensing: synthesize undetectable attacks, compute worst-case
undetectable attacks via an indirect optimal-control BVP, and plan
secure trajectories along which any deviating attack is detectable.
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
