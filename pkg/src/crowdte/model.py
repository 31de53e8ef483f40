"""One-coin crowdsourcing model: parameters, identifiability and population quantities.

Reliability vectors are plain 1-d float arrays. ``theta[i]`` is the reliability of
worker ``i``: when the worker answers, the answer is correct with probability
``(1 + theta[i]) / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InvalidDimensionError(ValueError):
    """Raised when an operation needs more workers than were given."""


def as_theta(values) -> np.ndarray:
    """Validate and return a reliability vector as a float64 array."""
    theta = np.asarray(values, dtype=np.float64)
    if theta.ndim != 1:
        raise ValueError(f"reliability vector must be 1-d, got shape {theta.shape}")
    if not np.all(np.abs(theta) <= 1.0):
        raise ValueError("every reliability must lie in [-1, 1]")
    return theta


@dataclass(frozen=True)
class ModelParams:
    theta: np.ndarray
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "theta", as_theta(self.theta))
        # alpha=0 is accepted so degenerate "nobody answers" streams can be simulated.
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")

    @property
    def n(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True)
class TaskSample:
    answers: np.ndarray  # length n, entries in {-1, 0, +1}
    ground_truth: int  # -1 or +1

    def __post_init__(self):
        answers = np.asarray(self.answers, dtype=np.int8)
        if not np.all(np.isin(answers, (-1, 0, 1))):
            raise ValueError("answers must lie in {-1, 0, +1}")
        if self.ground_truth not in (-1, 1):
            raise ValueError("ground truth must be -1 or +1")
        object.__setattr__(self, "answers", answers)


def a_functional(theta) -> float:
    """min_k max_{i<j, i,j != k} sqrt(|theta_i theta_j|).

    Removing either of the two most reliable workers is always the worst case, so
    the value reduces to the geometric mean of the 2nd and 3rd largest |theta|.
    """
    mags = np.sort(np.abs(as_theta(theta)))[::-1]
    if mags.shape[0] < 3:
        raise InvalidDimensionError("A(theta) needs at least 3 workers")
    return float(np.sqrt(mags[1] * mags[2]))


def b_functional(theta) -> float:
    """Total reliability."""
    return float(np.sum(as_theta(theta)))


def in_identifiable_set(theta) -> bool:
    theta = as_theta(theta)
    return bool(np.count_nonzero(theta) >= 3 and theta.sum() > 0)


def in_hardness_class(theta, a: float, b: float, tol: float = 1e-12) -> bool:
    """Membership of {theta : A(theta) >= a, B(theta) >= b}."""
    return a_functional(theta) >= a - tol and b_functional(theta) >= b - tol


def population_covariance(theta) -> np.ndarray:
    """Conditional covariance C_ij = theta_i theta_j; the diagonal is 0 and never read."""
    theta = as_theta(theta)
    cov = np.outer(theta, theta)
    np.fill_diagonal(cov, 0.0)
    return cov


def worker_weights(theta) -> np.ndarray:
    """Log-odds weights ln((1+theta)/(1-theta)), +/-inf at theta = +/-1."""
    theta = as_theta(theta)
    with np.errstate(divide="ignore"):
        return np.log1p(theta) - np.log1p(-theta)


def loglikelihood_ratio(answers, theta) -> float:
    """ln(P(x | G=+1) / P(x | G=-1)) = sum_i w_i x_i.

    Infinite weights propagate as signed infinities. If both +inf and -inf fire the
    ratio is indeterminate and ``nan`` is returned.
    """
    x = np.asarray(answers)
    w = worker_weights(theta)
    if x.shape != w.shape:
        raise ValueError("answers and theta must have the same length")
    active = x != 0
    with np.errstate(invalid="ignore"):
        return float(np.sum(w[active] * x[active]))

