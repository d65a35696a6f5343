"""Integration-kernel backend selection.

Prefers the compiled Cython extension ``_fast``; falls back to the
pure-Python reference ``_pyref`` with identical signatures. Set
``SPOOFPLAN_PURE_PYTHON=1`` to force the fallback (used by the parity
tests and the benchmark).
"""

import os

from . import _pyref

if os.environ.get("SPOOFPLAN_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pyref
else:
    try:
        from . import _fast as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _pyref

BACKEND = _impl.BACKEND

OK = _pyref.OK
INFEASIBLE = _pyref.INFEASIBLE
SINGULAR = _pyref.SINGULAR

POLICY_ZERO = _pyref.POLICY_ZERO
POLICY_FRACTION = _pyref.POLICY_FRACTION
POLICY_GREEDY_SWITCH = _pyref.POLICY_GREEDY_SWITCH
POLICY_NOMINAL_TANGENTIAL = _pyref.POLICY_NOMINAL_TANGENTIAL

rollout_di = _impl.rollout_di
rollout_unicycle = _impl.rollout_unicycle
coint_attack = _impl.coint_attack
shoot_attack = _impl.shoot_attack
shoot_attack_back = _impl.shoot_attack_back
shoot_secure = _impl.shoot_secure
rollout_secure_kappa = _impl.rollout_secure_kappa
coint_unicycle_comp = _impl.coint_unicycle_comp
