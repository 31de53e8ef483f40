"""Triangular estimation (TE) of worker reliabilities.

The estimator only needs the pairwise agreement counters

    M[i, j] = sum_s X_i(s) X_j(s)        N[i, j] = sum_s |X_i(s) X_j(s)|

which are kept as exact integers, so streamed, batched and merged states are
bit-identical. The empirical covariance C = M / max(N, 1) is formed at read time.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .model import InvalidDimensionError, as_theta, population_covariance

SNAPSHOT_MAGIC = "crowdte-te-state"
SNAPSHOT_VERSION = 1


class TeState:
    """Streaming sufficient statistics for TE. Diagonals stay at zero."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("need at least one worker")
        self.n = n
        self.t = 0
        self.M = np.zeros((n, n), dtype=np.int64)
        self.N = np.zeros((n, n), dtype=np.int64)

    def __repr__(self):
        return f"TeState(n={self.n}, t={self.t})"

    def __eq__(self, other):
        if not isinstance(other, TeState):
            return NotImplemented
        return (
            self.n == other.n
            and self.t == other.t
            and np.array_equal(self.M, other.M)
            and np.array_equal(self.N, other.N)
        )

    def copy(self) -> "TeState":
        out = TeState(self.n)
        out.t = self.t
        out.M = self.M.copy()
        out.N = self.N.copy()
        return out

    def update(self, answers) -> "TeState":
        """Ingest one task's answer vector in O(n^2)."""
        x = np.asarray(answers, dtype=np.int64)
        if x.shape != (self.n,):
            raise ValueError(f"expected {self.n} answers, got shape {x.shape}")
        prod = np.outer(x, x)
        np.fill_diagonal(prod, 0)
        self.M += prod
        self.N += np.abs(prod)
        self.t += 1
        return self

    def update_many(self, answers) -> "TeState":
        """Ingest a (t, n) block of tasks at once; same result as repeated update()."""
        X = np.asarray(answers)
        if X.ndim != 2 or X.shape[1] != self.n:
            raise ValueError(f"expected a (t, {self.n}) answer matrix, got {X.shape}")
        Xf = X.astype(np.float64)
        absf = np.abs(Xf)
        # Sums of +/-1 over fewer than 2**53 tasks are exact in float64.
        M = (Xf.T @ Xf).astype(np.int64)
        N = (absf.T @ absf).astype(np.int64)
        np.fill_diagonal(M, 0)
        np.fill_diagonal(N, 0)
        self.M += M
        self.N += N
        self.t += X.shape[0]
        return self

    @classmethod
    def from_answers(cls, answers) -> "TeState":
        X = np.asarray(answers)
        return cls(X.shape[1]).update_many(X)

    def covariance(self) -> np.ndarray:
        return self.M / np.maximum(self.N, 1)


def merge(s1: TeState, s2: TeState) -> TeState:
    if s1.n != s2.n:
        raise ValueError(f"cannot merge states over {s1.n} and {s2.n} workers")
    out = TeState(s1.n)
    out.t = s1.t + s2.t
    out.M = s1.M + s2.M
    out.N = s1.N + s2.N
    return out


@dataclass(frozen=True)
class PopulationCovariance:
    """Exact covariance source: lets estimate() run on C = theta theta^T."""

    theta: np.ndarray

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    def covariance(self) -> np.ndarray:
        return population_covariance(self.theta)


def inject_population(theta) -> PopulationCovariance:
    return PopulationCovariance(as_theta(theta))


@dataclass(frozen=True)
class TeEstimate:
    theta_hat: np.ndarray
    abs_theta: np.ndarray
    signs: np.ndarray
    k_star: int
    pairs: np.ndarray  # (n, 2): the pair (i_k, j_k) used for worker k


def _ranked_pairs(cov: np.ndarray):
    """Upper-triangular pairs sorted by decreasing |C|, ties in lexicographic order."""
    i, j = np.triu_indices(cov.shape[0], k=1)
    order = np.argsort(-np.abs(cov[i, j]), kind="stable")
    return i[order], j[order]


def most_informative_pair(cov, k: int) -> tuple[int, int]:
    cov = np.asarray(cov)
    n = cov.shape[0]
    if n < 3:
        raise InvalidDimensionError("TE needs at least 3 workers")
    if not 0 <= k < n:
        raise IndexError(f"worker {k} out of range")
    i, j = _ranked_pairs(cov)
    first = int(np.argmax((i != k) & (j != k)))
    return int(i[first]), int(j[first])


def _abs_from_cov(cov: np.ndarray):
    n = cov.shape[0]
    if n < 3:
        raise InvalidDimensionError("TE needs at least 3 workers")
    i, j = _ranked_pairs(cov)
    k = np.arange(n)[:, None]
    first = np.argmax((i[None, :] != k) & (j[None, :] != k), axis=1)
    ik, jk = i[first], j[first]
    ks = np.arange(n)
    denom = cov[ik, jk]
    ok = denom != 0
    ratio = np.zeros(n)
    ratio[ok] = np.abs(cov[ik[ok], ks[ok]] * cov[jk[ok], ks[ok]] / denom[ok])
    abs_theta = np.minimum(np.sqrt(ratio), 1.0)
    return abs_theta, np.column_stack([ik, jk])


def _sign(x):
    return np.where(np.asarray(x) >= 0, 1, -1)


def _signs_from_cov(cov: np.ndarray, abs_theta: np.ndarray):
    score = abs_theta**2 + cov.sum(axis=0) - np.diag(cov)
    k_star = int(np.argmax(np.abs(score)))
    star_sign = int(_sign(score[k_star]))
    signs = star_sign * _sign(cov[:, k_star])
    signs[k_star] = star_sign
    return signs.astype(np.int64), k_star


def estimate_abs(source):
    """Per-worker |theta_k| from the most informative pair avoiding k, clipped to [0, 1]."""
    return _abs_from_cov(np.asarray(source.covariance()))


def estimate_sign(source, abs_theta):
    """Signs via the worker k* whose row score |theta_k^2 + sum_i C_ik| is largest."""
    return _signs_from_cov(np.asarray(source.covariance()), np.asarray(abs_theta))


def estimate(source) -> TeEstimate:
    """Run TE on anything exposing ``covariance()`` (a TeState or a population source)."""
    cov = np.asarray(source.covariance())
    abs_theta, pairs = _abs_from_cov(cov)
    signs, k_star = _signs_from_cov(cov, abs_theta)
    return TeEstimate(signs * abs_theta, abs_theta, signs, k_star, pairs)


def save_state(state: TeState, path) -> None:
    """Write a versioned CSV snapshot holding the upper triangles of M and N."""
    i, j = np.triu_indices(state.n, k=1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([SNAPSHOT_MAGIC, SNAPSHOT_VERSION, state.n, state.t])
        w.writerow(["i", "j", "M", "N"])
        w.writerows(zip(i.tolist(), j.tolist(), state.M[i, j].tolist(), state.N[i, j].tolist()))


def load_state(path) -> TeState:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        head = next(rows, None)
        if not head or head[0] != SNAPSHOT_MAGIC:
            raise ValueError(f"{path}: not a TE state snapshot")
        if int(head[1]) != SNAPSHOT_VERSION:
            raise ValueError(f"{path}: unsupported snapshot version {head[1]}")
        state = TeState(int(head[2]))
        state.t = int(head[3])
        next(rows)
        for row in rows:
            i, j, m, nn = map(int, row)
            state.M[i, j] = state.M[j, i] = m
            state.N[i, j] = state.N[j, i] = nn
    return state
