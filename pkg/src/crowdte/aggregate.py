"""Ground-truth predictors: majority vote and (plug-in) weighted majority vote."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimator import TeState, estimate
from .model import worker_weights

# Relative tolerance for declaring a weighted vote tied (a few ulps per term).
TIE_RTOL = 64 * np.finfo(np.float64).eps


@dataclass(frozen=True)
class Prediction:
    value: int
    score: float
    tie_broken: bool


def weights_from_theta(theta) -> np.ndarray:
    return worker_weights(theta)


def vote_scores(answers, weights) -> np.ndarray:
    """Vote statistic W = (1/n) sum_i w_i x_i for every row of ``answers``.

    Infinite weights dominate: a row where only +inf (resp. -inf) contributions fire
    scores +inf (resp. -inf); a row where both fire scores nan (indeterminate).
    Works on a single answer vector or on a (t, n) matrix.

    A finite score within rounding error of zero, relative to sum_i |w_i x_i|, is
    returned as exactly 0 so that ties survive any positive rescaling of the weights.
    """
    X = np.asarray(answers, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if X.shape[-1] != w.shape[0]:
        raise ValueError("answers and weights must have the same number of workers")
    inf = np.isinf(w)
    finite_w = np.where(inf, 0.0, w)
    score = X @ finite_w / w.shape[0]
    magnitude = np.abs(X) @ np.abs(finite_w) / w.shape[0]
    score = np.where(np.abs(score) <= TIE_RTOL * magnitude, 0.0, score)
    if inf.any():
        contrib = X[..., inf] * np.sign(w[inf])
        pos = (contrib > 0).any(axis=-1)
        neg = (contrib < 0).any(axis=-1)
        score = np.where(pos & ~neg, np.inf, score)
        score = np.where(neg & ~pos, -np.inf, score)
        score = np.where(pos & neg, np.nan, score)
    return score


def _coin(rng: np.random.Generator, size=None):
    return 2 * rng.integers(0, 2, size=size) - 1


def weighted_majority(answers, weights, rng: np.random.Generator) -> Prediction:
    """sign(W), with a fair +/-1 coin when W = 0 or W is indeterminate."""
    score = float(vote_scores(answers, weights))
    if np.isnan(score) or score == 0:
        return Prediction(int(_coin(rng)), score, True)
    return Prediction(1 if score > 0 else -1, score, False)


def majority(answers, rng: np.random.Generator) -> Prediction:
    return weighted_majority(answers, np.ones(len(answers)), rng)


def predict_scores(scores, rng: np.random.Generator):
    """Vectorized decision rule. Draws one coin per task so that the rng stream
    does not depend on where ties fall. Returns (values, tie_mask)."""
    scores = np.asarray(scores, dtype=np.float64)
    coins = _coin(rng, size=scores.shape)
    tie = np.isnan(scores) | (scores == 0)
    values = np.where(tie, coins, np.where(scores > 0, 1, -1))
    return values.astype(np.int8), tie


def predict_dataset(answers, truth, theta, rng: np.random.Generator):
    """Weighted-majority predictions with weights from ``theta``.

    Returns (predictions, error_rate); error_rate is None when ``truth`` is None.
    """
    values, _ = predict_scores(vote_scores(answers, weights_from_theta(theta)), rng)
    if truth is None:
        return values, None
    return values, float(np.mean(values != np.asarray(truth)))


def predict_majority(answers, truth, rng: np.random.Generator):
    X = np.asarray(answers)
    values, _ = predict_scores(vote_scores(X, np.ones(X.shape[-1])), rng)
    if truth is None:
        return values, None
    return values, float(np.mean(values != np.asarray(truth)))


def predict_online(answers, rng: np.random.Generator):
    """Predict task s with the TE estimate built from tasks 0..s-1 only.

    This is the causal variant; benchmarks use the two-pass offline predictor.
    """
    X = np.asarray(answers)
    state = TeState(X.shape[1])
    out = np.empty(X.shape[0], dtype=np.int8)
    for s, x in enumerate(X):
        theta_hat = estimate(state).theta_hat
        out[s] = weighted_majority(x, weights_from_theta(theta_hat), rng).value
        state.update(x)
    return out
