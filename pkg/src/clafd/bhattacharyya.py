"""Bhattacharyya statistics between pairs of candidate-model output predictions.

For two Gaussian output predictions N(yh_i(u), Sigma_i) and N(yh_j(u), Sigma_j)
whose means are affine in the stacked input u, the Bhattacharyya distance is a
convex quadratic

    d_ij(u) = u' H u + c' u + h,      B_ij(u) = exp(-d_ij(u)),

with H = Gamma' Omega^-1 Gamma / 4, c = Gamma' Omega^-1 zeta / 2,
Omega = Sigma_i + Sigma_j, Gamma / zeta the input / state parts of the mean
difference, and h collecting the constant Mahalanobis part plus the
determinant penalty log(|Omega/2| / sqrt(|Sigma_i| |Sigma_j|)) / 2.  The
probability-weighted sum of coefficients upper-bounds the predicted Bayes
error of the model-selection test, which is the design objective.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .beliefs import BeliefState
from .estimation import FilterState, output_stats
from .models import LiftedModel


@dataclass(frozen=True)
class PairQuadratic:
    """Quadratic form of the Bhattacharyya distance for one model pair."""

    H: np.ndarray
    c: np.ndarray
    h: float
    Omega: np.ndarray
    Gamma: np.ndarray
    zeta: np.ndarray
    pair: tuple[int, int]

    @property
    def m(self) -> int:
        return self.c.size


def _logdet_psd(M: np.ndarray, what: str) -> float:
    try:
        cf = cho_factor(M)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ValueError(f"{what} is not positive definite") from exc
    return 2.0 * float(np.sum(np.log(np.diag(cf[0]))))


def _pair_from_stats(mean0_i, ctb_i, sigma_i, mean0_j, ctb_j, sigma_j,
                     pair=(0, 1)) -> PairQuadratic:
    Omega = sigma_i + sigma_j
    Gamma = ctb_i - ctb_j
    zeta = mean0_i - mean0_j
    try:
        cf = cho_factor(0.5 * (Omega + Omega.T))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ValueError("Omega = Sigma_i + Sigma_j is not positive definite") from exc

    OiG = cho_solve(cf, Gamma)
    Oiz = cho_solve(cf, zeta)
    H = 0.25 * (Gamma.T @ OiG)
    H = 0.5 * (H + H.T)
    c = 0.5 * (Gamma.T @ Oiz)

    n = Omega.shape[0]
    logdet_half_omega = 2.0 * float(np.sum(np.log(np.diag(cf[0])))) + n * np.log(0.5)
    h = (0.25 * float(zeta @ Oiz)
         + 0.5 * (logdet_half_omega
                  - 0.5 * _logdet_psd(sigma_i, "Sigma_i")
                  - 0.5 * _logdet_psd(sigma_j, "Sigma_j")))
    return PairQuadratic(H=H, c=c, h=float(h), Omega=Omega, Gamma=Gamma,
                         zeta=zeta, pair=pair)


def pair_quadratic(lifted_i: LiftedModel, lifted_j: LiftedModel,
                   fs_i: FilterState, fs_j: FilterState) -> PairQuadratic:
    """Bhattacharyya quadratic of one model pair at the lifts' full horizon."""
    if (lifted_i.N, lifted_i.n_u, lifted_i.n_y) != (lifted_j.N, lifted_j.n_u, lifted_j.n_y):
        raise ValueError("lifted models must share horizon and input/output sizes")
    mean0_i, sigma_i = output_stats(lifted_i, fs_i)
    mean0_j, sigma_j = output_stats(lifted_j, fs_j)
    return _pair_from_stats(mean0_i, lifted_i.CTB, sigma_i,
                            mean0_j, lifted_j.CTB, sigma_j)


def all_pairs(lifteds, filters) -> list[PairQuadratic]:
    """Pair quadratics for every i < j, sharing per-model output statistics."""
    stats = [output_stats(lift, fs) for lift, fs in zip(lifteds, filters)]
    pairs = []
    for i in range(len(lifteds)):
        for j in range(i + 1, len(lifteds)):
            pairs.append(_pair_from_stats(stats[i][0], lifteds[i].CTB, stats[i][1],
                                          stats[j][0], lifteds[j].CTB, stats[j][1],
                                          pair=(i, j)))
    return pairs


def prefix_pair_sets(lifteds, filters) -> dict[int, list[PairQuadratic]]:
    """Pair quadratics at every sub-horizon length 1..N.

    The length-L statistics are the leading blocks of the full-horizon ones:
    the covariance of the first L outputs does not depend on the horizon, so
    the full-horizon mean, CTB, and Sigma are sliced instead of re-lifted.
    """
    N = lifteds[0].N
    n_y = lifteds[0].n_y
    n_u = lifteds[0].n_u
    stats = [output_stats(lift, fs) for lift, fs in zip(lifteds, filters)]
    out: dict[int, list[PairQuadratic]] = {}
    for L in range(1, N + 1):
        ny, nu = L * n_y, L * n_u
        pairs = []
        for i in range(len(lifteds)):
            for j in range(i + 1, len(lifteds)):
                mi, si = stats[i]
                mj, sj = stats[j]
                pairs.append(_pair_from_stats(
                    mi[:ny], lifteds[i].CTB[:ny, :nu], si[:ny, :ny],
                    mj[:ny], lifteds[j].CTB[:ny, :nu], sj[:ny, :ny],
                    pair=(i, j)))
        out[L] = pairs
    return out


def shift_quadratic(pq: PairQuadratic, center: np.ndarray) -> PairQuadratic:
    """Re-express the quadratic in coordinates translated by ``center``.

    With u = u' + center, the mean difference shifts by Gamma center, giving
    c' = c + 2 H center and h' = h + center' H center + c' center.  Used for
    energy balls around a nonzero reference.
    """
    r = np.asarray(center, dtype=float).reshape(-1)
    if r.size != pq.m:
        raise ValueError("center length must match the quadratic dimension")
    c_new = pq.c + 2.0 * (pq.H @ r)
    h_new = pq.h + float(r @ pq.H @ r) + float(pq.c @ r)
    return PairQuadratic(H=pq.H, c=c_new, h=h_new, Omega=pq.Omega,
                         Gamma=pq.Gamma, zeta=pq.zeta + pq.Gamma @ r, pair=pq.pair)


def bhatt_distance(pq: PairQuadratic, u) -> float:
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != pq.m:
        raise ValueError(f"input length {u.size}, expected {pq.m}")
    return float(u @ pq.H @ u + pq.c @ u + pq.h)


def bhatt_coefficient(pq: PairQuadratic, u) -> float:
    return float(np.exp(-bhatt_distance(pq, u)))


def pair_weights(pairs, b: BeliefState) -> np.ndarray:
    """sqrt(P_i P_j) per pair, evaluated in log domain."""
    lp = b.log_probs
    return np.array([np.exp(0.5 * (lp[i] + lp[j])) for i, j in (p.pair for p in pairs)])


def weighted_bound(pairs, b: BeliefState, u) -> float:
    """Upper bound on the predicted misdiagnosis probability at input u."""
    w = pair_weights(pairs, b)
    return float(sum(wi * bhatt_coefficient(pq, u) for wi, pq in zip(w, pairs)))


def weighted_bound_grad(pairs, b: BeliefState, u) -> np.ndarray:
    """Analytic gradient of ``weighted_bound`` with respect to u."""
    u = np.asarray(u, dtype=float).reshape(-1)
    w = pair_weights(pairs, b)
    g = np.zeros_like(u)
    for wi, pq in zip(w, pairs):
        g -= wi * bhatt_coefficient(pq, u) * (2.0 * (pq.H @ u) + pq.c)
    return g


def taylor_value(pq: PairQuadratic, u) -> float:
    """Second-order expansion of the coefficient around u = 0."""
    u = np.asarray(u, dtype=float).reshape(-1)
    b0 = np.exp(-pq.h)
    cu = float(pq.c @ u)
    quad = 0.5 * (cu * cu - 2.0 * float(u @ pq.H @ u))
    return float(b0 * (quad - cu + 1.0))


def taylor_form(pq: PairQuadratic):
    """Coefficients (P, q, r) with T(u) = u' P u / 2 + q' u + r.

    P equals the exact Hessian of the coefficient at 0 and q its gradient, so
    the quadratic can be handed to the input-design solvers directly.
    """
    b0 = float(np.exp(-pq.h))
    P = b0 * (np.outer(pq.c, pq.c) - 2.0 * pq.H)
    q = -b0 * pq.c
    return P, q, b0


def stack_pairs(pairs):
    """Contiguous (H, c, h) stacks for the batch evaluation kernels."""
    H = np.ascontiguousarray([pq.H for pq in pairs], dtype=float)
    c = np.ascontiguousarray([pq.c for pq in pairs], dtype=float)
    h = np.ascontiguousarray([pq.h for pq in pairs], dtype=float)
    return H, c, h
