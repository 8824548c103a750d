"""Per-model Kalman prediction and horizon output prediction.

Each candidate model carries its own one-step-ahead predictor in the form
(xh[k+1|k], Xi[k+1|k]).  The correlated-noise gain is

    K = (A Xi C' + S) (C Xi C' + R)^-1

and the recursion keeps the predicted density of the measurement,
N(C xh, C Xi C' + R), available for the Bayesian belief update.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .models import LiftedModel, NoiseModel, StateSpaceModel


@dataclass(frozen=True)
class FilterState:
    """One-step-ahead state prediction and its covariance."""

    x_pred: np.ndarray
    Xi_pred: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x_pred, dtype=float).reshape(-1)
        Xi = np.asarray(self.Xi_pred, dtype=float)
        if Xi.shape != (x.size, x.size):
            raise ValueError("Xi_pred must be n_x by n_x")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(Xi))):
            raise ValueError("filter state has non-finite entries")
        object.__setattr__(self, "x_pred", x)
        object.__setattr__(self, "Xi_pred", 0.5 * (Xi + Xi.T))


@dataclass(frozen=True)
class OutputPrediction:
    """Mean and covariance of the stacked future outputs y[k+1..k+N]."""

    y_mean: np.ndarray
    Sigma: np.ndarray


def kf_step(fs: FilterState, model: StateSpaceModel, noise: NoiseModel,
            u: np.ndarray, y: np.ndarray):
    """Advance one predictor step with input u and measurement y.

    Returns (new_state, innovation_mean, innovation_cov) where the innovation
    statistics are the mean C xh and covariance C Xi C' + R of the predicted
    measurement, i.e. the Gaussian likelihood parameters for y.
    """
    A, B, C = model.A, model.B, model.C
    Q, R, S = noise.Q, noise.R, noise.S
    x, Xi = fs.x_pred, fs.Xi_pred
    u = np.asarray(u, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)

    innov_mean = C @ x
    innov_cov = C @ Xi @ C.T + R
    innov_cov = 0.5 * (innov_cov + innov_cov.T)
    try:
        cf = cho_factor(innov_cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError("innovation covariance is not positive definite") from exc

    # K = (A Xi C' + S) (C Xi C' + R)^-1 via the Cholesky factor, never an
    # explicit inverse.
    cross = A @ Xi @ C.T + S
    K = cho_solve(cf, cross.T).T

    x_new = A @ x + B @ u + K @ (y - innov_mean)
    Xi_new = A @ Xi @ A.T + Q - K @ innov_cov @ K.T
    return FilterState(x_new, Xi_new), innov_mean, innov_cov


def predict_outputs(lifted: LiftedModel, fs: FilterState, u_vec: np.ndarray) -> OutputPrediction:
    """Predicted distribution of the next N stacked outputs for one model."""
    u_vec = np.asarray(u_vec, dtype=float).reshape(-1)
    if u_vec.size != lifted.N * lifted.n_u:
        raise ValueError(f"u_vec must have length {lifted.N * lifted.n_u}")
    if fs.x_pred.size != lifted.model.n_x:
        raise ValueError("filter state does not match the lifted model")
    mean0, Sigma = output_stats(lifted, fs)
    return OutputPrediction(mean0 + lifted.CTB @ u_vec, Sigma)


def output_stats(lifted: LiftedModel, fs: FilterState):
    """Input-free output mean CA xh and the output covariance Sigma.

    Sigma = CA Xi CA' + CT boldQ CT' + CT boldS + boldS' CT' + boldR, with
    CA = boldC boldA and CT = boldC toeplitzA.  The input shifts the mean by
    CTB u but leaves Sigma unchanged.
    """
    CA, CT = lifted.CA, lifted.CT
    mean0 = CA @ fs.x_pred
    cross = CT @ lifted.boldS
    Sigma = (CA @ fs.Xi_pred @ CA.T + CT @ lifted.boldQ @ CT.T
             + cross + cross.T + lifted.boldR)
    return mean0, 0.5 * (Sigma + Sigma.T)


def steady_state_gain(model: StateSpaceModel, noise: NoiseModel,
                      tol: float = 1e-12, max_iter: int = 100_000):
    """Converged predictor gain and covariance by iterating the recursion."""
    Xi = np.eye(model.n_x)
    A, C = model.A, model.C
    Q, R, S = noise.Q, noise.R, noise.S
    for _ in range(max_iter):
        innov_cov = C @ Xi @ C.T + R
        cf = cho_factor(0.5 * (innov_cov + innov_cov.T))
        K = cho_solve(cf, (A @ Xi @ C.T + S).T).T
        Xi_new = A @ Xi @ A.T + Q - K @ innov_cov @ K.T
        Xi_new = 0.5 * (Xi_new + Xi_new.T)
        if np.linalg.norm(Xi_new - Xi, "fro") < tol:
            return K, Xi_new
        Xi = Xi_new
    raise ValueError("predictor covariance did not converge; is (A, C) detectable?")
