"""Concavity region of a Gaussian-exponential quadratic and its online checks.

The coefficient B(u) = exp(-(u' H u + c' u + h)) with PSD H is concave exactly
on the ellipsoidal region

    u' H u + c' u + (1/4) c' U1 Lambda1^-1 U1' c <= 1/2

where H = U1 Lambda1 U1' is the thin eigendecomposition.  Checking the region
over a polytope reduces to its vertices; over a product of per-step energy
balls it reduces to comparing sqrt(eps N) against the norm of the minimum-norm
point on the region boundary, which a scalar bisection finds.

All checks are tri-state: True (certified concave), False (certified not), or
None when c has a significant component outside range(H), where the region
algebra does not apply and no certificate is claimed.
"""

from dataclasses import dataclass

import numpy as np

from .bhattacharyya import PairQuadratic

#: relative tolerance for deciding that c lies in range(H)
C_RANGE_TOL = 1e-8


@dataclass(frozen=True)
class ConcavitySpectrum:
    """Split eigendecomposition of H: positive part (U1, Lambda1) and null part U2."""

    U1: np.ndarray
    U2: np.ndarray
    Lambda1: np.ndarray
    rank_tol: float

    @property
    def r(self) -> int:
        return self.Lambda1.size

    @property
    def degenerate(self) -> bool:
        return self.r == 0


@dataclass(frozen=True)
class RootBracket:
    """Bisection interval for the boundary multiplier, with the curve data."""

    tau_minus: float
    tau_plus: float
    lam: np.ndarray
    b: np.ndarray


def spectrum(pq: PairQuadratic, rank_tol: float = 1e-10) -> ConcavitySpectrum:
    """Eigendecomposition of H split at rank_tol times the largest eigenvalue."""
    H = 0.5 * (pq.H + pq.H.T)
    eigval, eigvec = np.linalg.eigh(H)
    lam_max = eigval[-1] if eigval.size else 0.0
    if eigval.size and eigval[0] < -1e-8 * max(lam_max, 1e-300):
        raise ValueError("H is not positive semi-definite")
    cut = rank_tol * max(lam_max, 0.0)
    keep = eigval > cut
    # descending order for the positive part
    idx = np.argsort(eigval[keep])[::-1]
    U1 = eigvec[:, keep][:, idx]
    Lambda1 = eigval[keep][idx]
    U2 = eigvec[:, ~keep]
    return ConcavitySpectrum(U1=U1, U2=U2, Lambda1=Lambda1, rank_tol=rank_tol)


def _c_in_range(pq: PairQuadratic, spec: ConcavitySpectrum) -> bool:
    c_norm = np.linalg.norm(pq.c)
    if c_norm == 0.0:
        return True
    resid = pq.c - spec.U1 @ (spec.U1.T @ pq.c)
    return np.linalg.norm(resid) <= C_RANGE_TOL * c_norm


def level_offset(pq: PairQuadratic, spec: ConcavitySpectrum) -> float:
    """(1/4) c' U1 Lambda1^-1 U1' c, the constant part of the region level."""
    if spec.degenerate:
        return 0.0
    c1 = spec.U1.T @ pq.c
    return 0.25 * float(c1 @ (c1 / spec.Lambda1))


def region_values(pq: PairQuadratic, spec: ConcavitySpectrum, U: np.ndarray) -> np.ndarray:
    """Region level u' H u + c' u + offset at each row of U; concave iff <= 1/2."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    quad = np.einsum("vi,ij,vj->v", U, pq.H, U)
    return quad + U @ pq.c + level_offset(pq, spec)


def concave_at(pq: PairQuadratic, spec: ConcavitySpectrum, u) -> bool | None:
    """Tri-state membership of u in the certified-concave region."""
    if not _c_in_range(pq, spec):
        return None
    val = region_values(pq, spec, np.asarray(u, dtype=float).reshape(1, -1))[0]
    return bool(val <= 0.5)


def check_polytope(pq: PairQuadratic, spec: ConcavitySpectrum, vertices) -> bool | None:
    """Certify concavity over a polytope by checking every vertex.

    Valid because the region is convex: containing all vertices contains the
    hull.
    """
    vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
    if vertices.shape[0] == 0:
        raise ValueError("vertex list is empty")
    if not _c_in_range(pq, spec):
        return None
    vals = region_values(pq, spec, vertices)
    return bool(np.all(vals <= 0.5))


def root_bracket(lam: np.ndarray, b: np.ndarray) -> RootBracket:
    """Bisection bracket for the multiplier of the boundary problem.

    lam holds the positive curvature eigenvalues (descending) and b >= 0 the
    sign-normalized linear coefficients; coordinates with b == 0 do not
    constrain the multiplier and are excluded from the endpoint minima.
    """
    inv = 1.0 / lam
    mask = b > 0.0
    if not np.any(mask):
        raise ValueError("bracket undefined when every linear coefficient is zero")
    n = lam.size
    tau_minus = float(np.min(inv[mask] - np.sqrt(n / 2.0) * b[mask]))
    tau_plus = float(np.min(inv[mask] - b[mask] / np.sqrt(2.0)))
    return RootBracket(tau_minus=tau_minus, tau_plus=tau_plus, lam=lam, b=b)


def _sphere_norm_sq(tau: float, inv: np.ndarray, b: np.ndarray) -> float:
    """|q(tau)|^2 along the critical curve, restricted to b > 0 coordinates."""
    mask = b > 0.0
    return float(np.sum(b[mask] ** 2 / (4.0 * (tau - inv[mask]) ** 2)))


def min_norm_boundary(spec: ConcavitySpectrum, c) -> np.ndarray:
    """Minimum-norm point z* on the boundary of the concavity region.

    Solves min |z|^2 subject to z' H z + c' z + offset = 1/2 by transforming to
    a sphere-constrained quadratic in normalized coordinates, where the
    stationarity conditions define a monotone scalar curve in the multiplier
    tau; the norm equation is solved by bisection on [tau_minus, tau_plus].
    When the linear coefficient vanishes on the extreme-curvature eigenspace
    the multiplier saturates there and the leftover sphere mass goes to that
    eigenspace (the degenerate case of the sphere-constrained problem).
    """
    if spec.degenerate:
        raise ValueError("H has no positive curvature; boundary undefined")
    c = np.asarray(c, dtype=float).reshape(-1)
    lam = spec.Lambda1
    c1 = spec.U1.T @ c
    resid = c - spec.U1 @ c1
    if np.linalg.norm(c) > 0 and np.linalg.norm(resid) > C_RANGE_TOL * np.linalg.norm(c):
        raise ValueError("c has a significant component outside range(H)")

    b_signed = -c1 / lam ** 1.5
    signs = np.where(b_signed < 0.0, -1.0, 1.0)
    b = signs * b_signed
    inv = 1.0 / lam
    tau_cap = float(inv[0])  # smallest inverse eigenvalue (lam descending)

    if not np.any(b > 0.0):
        # pure quadratic boundary: align with the largest curvature
        g = np.zeros(spec.r)
        g[0] = -1.0 / np.sqrt(2.0)
    else:
        # does the curve blow up at tau_cap (some b>0 on the extreme eigenspace)?
        blow_up = np.any((b > 0.0) & np.isclose(inv, tau_cap))
        if not blow_up and _sphere_norm_sq(tau_cap, inv, b) < 0.5:
            # multiplier saturates; distribute the leftover mass on the first
            # zero-coefficient extreme coordinate
            q = np.zeros(spec.r)
            mask = b > 0.0
            q[mask] = b[mask] / (2.0 * (tau_cap - inv[mask]))
            free = np.where((b == 0.0) & np.isclose(inv, tau_cap))[0]
            q[free[0]] = -np.sqrt(0.5 - float(q @ q))
        else:
            br = root_bracket(lam, b)
            lo, hi = br.tau_minus, min(br.tau_plus, tau_cap)
            # guard the bracket numerically (f is increasing in tau)
            for _ in range(200):
                if _sphere_norm_sq(lo, inv, b) <= 0.5:
                    break
                lo -= max(hi - lo, 1.0)
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                if _sphere_norm_sq(mid, inv, b) < 0.5:
                    lo = mid
                else:
                    hi = mid
                if hi - lo < 1e-12:
                    break
            tau = 0.5 * (lo + hi)
            q = np.zeros(spec.r)
            mask = b > 0.0
            q[mask] = b[mask] / (2.0 * (tau - inv[mask]))
        g = signs * q
        g *= (1.0 / np.sqrt(2.0)) / np.linalg.norm(g)  # enforce |g|^2 = 1/2 exactly

    z = spec.U1 @ (g / np.sqrt(lam) - 0.5 * c1 / lam)
    return z


def check_energy_ball(pq: PairQuadratic, spec: ConcavitySpectrum,
                      energy_bound: float, N: int) -> bool | None:
    """Certify concavity over the product of N per-step energy balls.

    Requires the center u = 0 to be inside the region; then the whole product
    set is inside whenever sqrt(eps N) <= |z*| with z* the minimum-norm
    boundary point.
    """
    if not _c_in_range(pq, spec):
        return None
    if spec.degenerate:
        # flat coefficient (c in range(H) with r = 0 forces c ~ 0): concave
        return True
    if level_offset(pq, spec) > 0.5:
        return False
    z = min_norm_boundary(spec, pq.c)
    return bool(np.sqrt(energy_bound * N) <= np.linalg.norm(z))
