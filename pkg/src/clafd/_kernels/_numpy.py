"""Pure-numpy implementations of the hot evaluation kernels.

Same contracts as the compiled module ``clafd._kernels._native``; used as the
fallback when the extension is not built (or when CLAFD_PURE_PYTHON is set).
"""

import numpy as np


def quad_batch_eval(H, c, h, U):
    """Evaluate a stack of quadratics at many points.

    Parameters
    ----------
    H : (p, m, m) array
    c : (p, m) array
    h : (p,) array
    U : (nv, m) array of evaluation points.

    Returns
    -------
    (p, nv) array with entry [q, v] = U[v] @ H[q] @ U[v] + c[q] @ U[v] + h[q].
    """
    HUt = H @ U.T  # (p, m, nv) via broadcast matmul
    quad = np.einsum("vm,pmv->pv", U, HUt)
    return quad + c @ U.T + h[:, None]


def weighted_exp_objective(H, c, h, w, U):
    """sum_q w[q] * exp(-(U[v] @ H[q] @ U[v] + c[q] @ U[v] + h[q])) per point.

    Returns a (nv,) array.
    """
    return w @ np.exp(-quad_batch_eval(H, c, h, U))


def weighted_exp_grad(H, c, h, w, u):
    """Gradient of ``weighted_exp_objective`` at a single point u (shape (m,))."""
    d = quad_batch_eval(H, c, h, u[None, :])[:, 0]
    coef = w * np.exp(-d)
    grads = 2.0 * (H @ u) + c
    return -(coef @ grads)
