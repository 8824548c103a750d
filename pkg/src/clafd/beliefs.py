"""Belief-state bookkeeping for the multi-hypothesis test.

The belief over candidate models is kept in log domain; a sequential
experiment multiplies hundreds of per-measurement likelihoods, which would
underflow in linear probability space.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp

from .estimation import FilterState


@dataclass(frozen=True)
class BeliefState:
    """Log model probabilities plus the per-model filter states."""

    log_probs: np.ndarray
    filters: tuple[FilterState, ...]

    def __post_init__(self):
        lp = np.asarray(self.log_probs, dtype=float).reshape(-1)
        if len(self.filters) != lp.size:
            raise ValueError("one filter state per model is required")
        total = logsumexp(lp)
        if not np.isfinite(total):
            raise ValueError("belief has no probability mass")
        object.__setattr__(self, "log_probs", lp - total)
        object.__setattr__(self, "filters", tuple(self.filters))

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    @property
    def n_models(self) -> int:
        return self.log_probs.size


def gaussian_loglik(y, mean, cov) -> float:
    """log N(y; mean, cov) for positive-definite cov."""
    y = np.asarray(y, dtype=float).reshape(-1)
    mean = np.asarray(mean, dtype=float).reshape(-1)
    cov = np.asarray(cov, dtype=float)
    try:
        cf = cho_factor(cov)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ValueError("covariance is not positive definite") from exc
    resid = y - mean
    maha = resid @ cho_solve(cf, resid)
    logdet = 2.0 * np.sum(np.log(np.diag(cf[0])))
    return -0.5 * (maha + logdet + y.size * np.log(2.0 * np.pi))


def update_beliefs(b: BeliefState, logliks) -> BeliefState:
    """Bayes update of the model probabilities from per-model log-likelihoods."""
    logliks = np.asarray(logliks, dtype=float).reshape(-1)
    if logliks.size != b.n_models:
        raise ValueError("one log-likelihood per model is required")
    if np.any(np.isnan(logliks)):
        raise ValueError("log-likelihoods contain NaN")
    post = b.log_probs + logliks
    total = logsumexp(post)
    if not np.isfinite(total):
        raise ValueError("measurement impossible under every model")
    return replace(b, log_probs=post - total)


def error_probability(b: BeliefState) -> float:
    """Probability of misdiagnosis when declaring the most likely model now."""
    return float(1.0 - np.max(b.probs))


def decide(b: BeliefState, threshold: float):
    """Most likely model index if its probability exceeds threshold, else None.

    Ties break to the lowest index.
    """
    probs = b.probs
    best = int(np.argmax(probs))
    return best if probs[best] > threshold else None
