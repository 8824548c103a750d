"""Linear candidate models, horizon lifting, and feedback-loop augmentation.

A candidate hypothesis is a discrete-time linear Gaussian state-space model

    x[k+1] = A x[k] + B u[k] + w[k]
    y[k]   = C x[k] + v[k]

with jointly Gaussian noise, E[(v;w)(v;w)'] = [[R, S'], [S, Q]] at equal
times and zero otherwise.  ``build_lifted`` stacks the model over a horizon of
N future steps so that output predictions become affine in the stacked input.
``close_loop`` absorbs an observer-based output-feedback controller into an
augmented candidate model of the same form, which lets the diagnosis pipeline
treat controlled plants exactly like uncontrolled ones.
"""

from dataclasses import dataclass

import numpy as np
import scipy.signal


def _as_matrix(M, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


@dataclass(frozen=True)
class StateSpaceModel:
    """One candidate hypothesis of the plant dynamics."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        C = _as_matrix(self.C, "C")
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(f"B has {B.shape[0]} rows, expected {A.shape[0]}")
        if C.shape[1] != A.shape[0]:
            raise ValueError(f"C has {C.shape[1]} cols, expected {A.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class NoiseModel:
    """Joint second-order statistics of process noise w and measurement noise v."""

    Q: np.ndarray
    R: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        Q = _as_matrix(self.Q, "Q")
        R = _as_matrix(self.R, "R")
        S = _as_matrix(self.S, "S")
        n_x, n_y = Q.shape[0], R.shape[0]
        if Q.shape != (n_x, n_x) or R.shape != (n_y, n_y):
            raise ValueError("Q and R must be square")
        if S.shape != (n_x, n_y):
            raise ValueError(f"S must be {n_x}x{n_y}, got {S.shape}")
        joint = self.joint_cov(Q, R, S)
        eig = np.linalg.eigvalsh(joint)
        if eig.min() < -1e-8 * max(1.0, eig.max()):
            raise ValueError("joint noise covariance [[R, S'],[S, Q]] is not PSD")
        # R = 0 is allowed for pure simulation; filtering raises explicitly when
        # an innovation covariance fails to factor.
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "S", S)

    @staticmethod
    def joint_cov(Q, R, S) -> np.ndarray:
        top = np.hstack([R, S.T])
        bot = np.hstack([S, Q])
        return np.vstack([top, bot])

    @property
    def joint(self) -> np.ndarray:
        return self.joint_cov(self.Q, self.R, self.S)


@dataclass(frozen=True)
class ControllerGains:
    """Feedback gain F, feedforward gain G, and observer gain K."""

    F: np.ndarray
    G: np.ndarray
    K: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "F", _as_matrix(self.F, "F"))
        object.__setattr__(self, "G", _as_matrix(self.G, "G"))
        object.__setattr__(self, "K", _as_matrix(self.K, "K"))


@dataclass(frozen=True)
class LiftedModel:
    """Horizon stack of a candidate model.

    With x-stack (x[k+1], ..., x[k+N]) and u/w/v-stacks starting at index k+1,

        x_stack = boldA x[k+1] + toeplitzA boldB u_stack + toeplitzA w_stack
        y_stack = boldC x_stack + v_stack

    where block (r, c) of ``toeplitzA`` is A^(r-c-1) for r > c and zero
    otherwise, so the first block row is zero.  ``boldS`` is the stacked
    cross-covariance E[w_stack v_stack'] = I_N (x) S; only its first N-1 block
    rows ever enter output statistics because the last block column of
    ``toeplitzA`` is zero.
    """

    model: StateSpaceModel
    noise: NoiseModel
    N: int
    boldA: np.ndarray
    boldB: np.ndarray
    boldC: np.ndarray
    toeplitzA: np.ndarray
    boldQ: np.ndarray
    boldR: np.ndarray
    boldS: np.ndarray
    # Products used by every output prediction: CA = boldC @ boldA,
    # CT = boldC @ toeplitzA, CTB = CT @ boldB.
    CA: np.ndarray
    CT: np.ndarray
    CTB: np.ndarray

    @property
    def n_u(self) -> int:
        return self.model.n_u

    @property
    def n_y(self) -> int:
        return self.model.n_y


def build_lifted(model: StateSpaceModel, noise: NoiseModel, N: int) -> LiftedModel:
    """Stack a candidate model over a horizon of N >= 1 future steps."""
    if N < 1:
        raise ValueError("horizon N must be >= 1")
    if noise.Q.shape[0] != model.n_x or noise.R.shape[0] != model.n_y:
        raise ValueError("noise dimensions do not match the model")
    A, B, C = model.A, model.B, model.C
    n_x, n_u, n_y = model.n_x, model.n_u, model.n_y

    powers = [np.eye(n_x)]
    for _ in range(N - 1):
        powers.append(A @ powers[-1])
    boldA = np.vstack(powers)

    toeplitzA = np.zeros((N * n_x, N * n_x))
    for r in range(N):
        for c in range(r):
            toeplitzA[r * n_x:(r + 1) * n_x, c * n_x:(c + 1) * n_x] = powers[r - c - 1]

    boldB = np.kron(np.eye(N), B)
    boldC = np.kron(np.eye(N), C)
    boldQ = np.kron(np.eye(N), noise.Q)
    boldR = np.kron(np.eye(N), noise.R)
    boldS = np.kron(np.eye(N), noise.S)

    CA = boldC @ boldA
    CT = boldC @ toeplitzA
    CTB = CT @ boldB
    return LiftedModel(model=model, noise=noise, N=N, boldA=boldA, boldB=boldB,
                       boldC=boldC, toeplitzA=toeplitzA, boldQ=boldQ, boldR=boldR,
                       boldS=boldS, CA=CA, CT=CT, CTB=CTB)


def close_loop(open_model: StateSpaceModel, open_noise: NoiseModel,
               nominal: StateSpaceModel, gains: ControllerGains):
    """Absorb an observer-based controller into an augmented candidate model.

    The controller runs a one-step-ahead observer xh for the nominal model and
    applies u_plant = -F xh + G u, where u is the external input that the
    diagnoser designs.  The augmented state is (x, xh) and the augmented
    process noise is (w, K v), giving

        A_cl = [[A_i, -B_i F], [K C_i, A0 - B0 F - K C0]]
        B_cl = [[B_i], [B0]] G,   C_cl = [C_i, 0]
        Q_cl = [[Q, S K'], [K S', K R K']],  S_cl = [[S], [K R]],  R_cl = R.
    """
    Ai, Bi, Ci = open_model.A, open_model.B, open_model.C
    A0, B0, C0 = nominal.A, nominal.B, nominal.C
    if open_model.n_x != nominal.n_x or open_model.n_u != nominal.n_u \
            or open_model.n_y != nominal.n_y:
        raise ValueError("candidate and nominal models must share dimensions")
    F, G, K = gains.F, gains.G, gains.K
    n_x, n_u, n_y = nominal.n_x, nominal.n_u, nominal.n_y
    if F.shape != (n_u, n_x) or G.shape != (n_u, n_u) or K.shape != (n_x, n_y):
        raise ValueError("controller gain dimensions do not match the nominal model")

    A_cl = np.block([[Ai, -Bi @ F],
                     [K @ Ci, A0 - B0 @ F - K @ C0]])
    B_cl = np.vstack([Bi, B0]) @ G
    C_cl = np.hstack([Ci, np.zeros((n_y, n_x))])

    Qo, Ro, So = open_noise.Q, open_noise.R, open_noise.S
    Q_cl = np.block([[Qo, So @ K.T],
                     [K @ So.T, K @ Ro @ K.T]])
    S_cl = np.vstack([So, K @ Ro])
    R_cl = Ro
    return StateSpaceModel(A_cl, B_cl, C_cl), NoiseModel(Q_cl, R_cl, S_cl)


def place_poles(A, B, poles) -> np.ndarray:
    """State-feedback gain F with eig(A - B F) at the requested real poles."""
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    poles = np.sort(np.asarray(poles, dtype=float))
    if poles.shape != (A.shape[0],):
        raise ValueError(f"need exactly {A.shape[0]} poles")
    # Controllability rank test up front: scipy's failure mode for an
    # uncontrollable pair is less direct.
    ctrb = np.hstack([np.linalg.matrix_power(A, k) @ B for k in range(A.shape[0])])
    if np.linalg.matrix_rank(ctrb) < A.shape[0]:
        raise ValueError("(A, B) is not controllable; cannot place poles")
    result = scipy.signal.place_poles(A, B, poles)
    F = result.gain_matrix
    placed = np.sort(np.linalg.eigvals(A - B @ F).real)
    if np.max(np.abs(placed - poles)) > 1e-8:
        raise ValueError("pole placement did not converge to the requested poles")
    return F


def dc_feedforward_gain(nominal: StateSpaceModel, F) -> np.ndarray:
    """Feedforward gain making the closed-loop DC gain from u to y identity.

    G = [C (I - A + B F)^-1 B]^-1 for the nominal model, so a constant input
    acts as an output reference in steady state.
    """
    A, B, C = nominal.A, nominal.B, nominal.C
    F = _as_matrix(F, "F")
    eye = np.eye(nominal.n_x)
    try:
        resolvent = np.linalg.solve(eye - A + B @ F, B)
    except np.linalg.LinAlgError as exc:
        raise ValueError("I - (A - B F) is singular; no DC gain") from exc
    dc = C @ resolvent
    if dc.shape[0] != dc.shape[1]:
        raise ValueError("DC gain is not square; feedforward inversion undefined")
    if abs(np.linalg.det(dc)) < 1e-12:
        raise ValueError("closed-loop DC gain is singular")
    return np.linalg.inv(dc)
