"""Kernel selection.

The compiled extension ``_kernels`` is used when it was built; otherwise
(or when ``CAVSEQ_PURE_PYTHON`` is set to a non-empty value) the
pure-Python reference in ``_pykernels`` is used.  Both expose the same
functions and produce identical floating-point results.
"""

import os

from . import _pykernels

if os.environ.get("CAVSEQ_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

IMPLEMENTATION = _impl.IMPLEMENTATION

free_coeffs = _impl.free_coeffs
fixed_coeffs = _impl.fixed_coeffs
sigma_coeffs = _impl.sigma_coeffs
reach_cap = _impl.reach_cap
end_speed = _impl.end_speed
extremes = _impl.extremes
plan = _impl.plan
free_time_residual = _impl.free_time_residual
free_time_root = _impl.free_time_root
head_target = _impl.head_target
forward_pass = _impl.forward_pass
fuel_integral = _impl.fuel_integral

# constants live in the reference module only
EPS = _pykernels.EPS
VM_GUARD = _pykernels.VM_GUARD
ROOT_TOL = _pykernels.ROOT_TOL
MAX_ITER = _pykernels.MAX_ITER
TERM_FREE = _pykernels.TERM_FREE
TERM_SIGMA = _pykernels.TERM_SIGMA
TERM_VMAX = _pykernels.TERM_VMAX
HEAD_CRUISE = _pykernels.HEAD_CRUISE
HEAD_RHO = _pykernels.HEAD_RHO
HEAD_FORCE_TC = _pykernels.HEAD_FORCE_TC
REL_SAME_LANE = _pykernels.REL_SAME_LANE
REL_SAME_ROAD = _pykernels.REL_SAME_ROAD
REL_OPPOSITE = _pykernels.REL_OPPOSITE
REL_CONFLICT = _pykernels.REL_CONFLICT
RELAXED = _pykernels.RELAXED
FLOORED = _pykernels.FLOORED
VIOLATION = _pykernels.VIOLATION
FAULT = _pykernels.FAULT
CLAMPED = _pykernels.CLAMPED
KEPT = _pykernels.KEPT
