"""Select the compiled kernels when available, else the numpy fallback.

Set ``TORIC_SZEGO_PURE_PYTHON=1`` to force the fallback (used by the
benchmark and by the backend-equivalence tests).
"""

from __future__ import annotations

import os

from . import _pykernels

pure = _pykernels

if os.environ.get("TORIC_SZEGO_PURE_PYTHON", "") not in ("", "0"):
    kernels = _pykernels
    compiled = None
else:
    try:
        from . import _kernels as compiled  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        compiled = None
    kernels = compiled if compiled is not None else _pykernels

BACKEND: str = kernels.BACKEND

potential_derivs = kernels.potential_derivs
log_hessian_det = kernels.log_hessian_det
norm_log_integrand = kernels.norm_log_integrand
convolve_shift_add = kernels.convolve_shift_add
