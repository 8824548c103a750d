"""Hot-loop kernels with a compiled core and a pure-numpy fallback.

The compiled module wins on the small per-iterate evaluations that dominate
ball-constrained designs (no array-machinery overhead); the numpy fallback
rides BLAS and wins on large vertex batches.  The dispatchers below pick per
call; set CLAFD_PURE_PYTHON=1 to force the numpy implementations everywhere
(used by the benchmark for comparison).
"""

import os

from . import _numpy

if os.environ.get("CLAFD_PURE_PYTHON"):
    _native = None
else:
    try:
        from . import _native
    except ImportError:
        _native = None

#: below this many evaluation points the compiled loops beat BLAS
_SMALL_BATCH = 256


def quad_batch_eval(H, c, h, U):
    if _native is not None and U.shape[0] < _SMALL_BATCH:
        return _native.quad_batch_eval(H, c, h, U)
    return _numpy.quad_batch_eval(H, c, h, U)


def weighted_exp_objective(H, c, h, w, U):
    if _native is not None and U.shape[0] < _SMALL_BATCH:
        return _native.weighted_exp_objective(H, c, h, w, U)
    return _numpy.weighted_exp_objective(H, c, h, w, U)


def weighted_exp_grad(H, c, h, w, u):
    if _native is not None:
        return _native.weighted_exp_grad(H, c, h, w, u)
    return _numpy.weighted_exp_grad(H, c, h, w, u)


def backend() -> str:
    """Name of the preferred kernel backend: 'native' or 'numpy'."""
    return "native" if _native is not None else "numpy"
