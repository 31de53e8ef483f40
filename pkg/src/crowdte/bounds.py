"""Numerical checks of the minimax lower bound and of the TE concentration machinery.

Everything here is brute force on purpose: exact joint distributions over
{-1, 0, +1}^n for small n, KL and chi-square divergences summed state by state,
and Monte Carlo tail frequencies compared against closed-form bounds.
"""

from __future__ import annotations

import enum
import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams, as_theta, b_functional, in_hardness_class
from .simulate import run_rng

MAX_ENUM_WORKERS = 10

# Constants of the lower-bound proof (c1 = 1/512, c2 = 1/1024) and of the
# upper-bound proof (c1' = 120 * 24^2, c2' = 30 * 8^2) plus the concentration
# lemma prefactors/exponents. Callers may pass a modified copy to run negative
# controls.
CONSTANTS = {
    "kl_abs_factor": 512.0,
    "kl_sign_factor": 1024.0,
    "c1_prime": 120.0 * 24**2,
    "c2_prime": 30.0 * 8**2,
    "matrix_tail_prefactor": 3.0,
    "matrix_tail_exponent": 120.0,
    "row_tail_exponent": 30.0,
    "row_count_exponent": 8.0,
}


class CapacityError(ValueError):
    """Raised when exact enumeration would exceed MAX_ENUM_WORKERS."""


class HardKind(str, enum.Enum):
    ABS_HARD = "abs"
    SIGN_HARD = "sign"


def _constants(overrides):
    merged = dict(CONSTANTS)
    if overrides:
        unknown = set(overrides) - set(CONSTANTS)
        if unknown:
            raise KeyError(f"unknown constants: {sorted(unknown)}")
        merged.update(overrides)
    return merged


@dataclass(frozen=True)
class BoundReport:
    kind: str
    lhs: float
    rhs: float
    params: dict = field(default_factory=dict)
    slack: float = 0.0  # allowed Monte Carlo excess (0 for exact checks)
    side_conditions: bool = True  # extra analytic checks folded into the report

    @property
    def satisfied(self) -> bool:
        return bool(self.side_conditions and self.lhs <= self.rhs + self.slack)

    @property
    def vacuous(self) -> bool:
        """A probability bound of at least 1 says nothing."""
        return self.kind.startswith("tail") and self.rhs >= 1.0

    def row(self) -> dict:
        out = {"kind": self.kind}
        out.update(self.params)
        out.update(lhs=self.lhs, rhs=self.rhs, satisfied=self.satisfied, vacuous=self.vacuous)
        return out


# -- exact distributions ---------------------------------------------------


@functools.lru_cache(maxsize=None)
def _states(n: int) -> np.ndarray:
    states = np.array(list(itertools.product((-1, 0, 1), repeat=n)), dtype=np.int8)
    states.setflags(write=False)
    return states


@dataclass(frozen=True)
class JointDistribution:
    n: int
    states: np.ndarray  # (3**n, n)
    probs: np.ndarray  # (3**n,)

    def __getitem__(self, x) -> float:
        """Probability of a single answer vector."""
        x = np.asarray(x)
        index = int(np.dot(x + 1, 3 ** np.arange(self.n - 1, -1, -1)))
        return float(self.probs[index])

    def as_dict(self) -> dict:
        return {tuple(int(v) for v in s): float(p) for s, p in zip(self.states, self.probs)}


def joint_distribution(params: ModelParams) -> JointDistribution:
    """P(x) = 1/2 sum_g prod_i p(x_i | g) over all x in {-1, 0, 1}^n."""
    n = params.n
    if n > MAX_ENUM_WORKERS:
        raise CapacityError(f"exact enumeration is capped at {MAX_ENUM_WORKERS} workers, got {n}")
    states = _states(n)
    alpha, theta = params.alpha, params.theta
    probs = np.zeros(states.shape[0])
    for g in (1, -1):
        agree = states == g
        disagree = states == -g
        kernel = np.where(
            agree,
            alpha * (1 + theta) / 2,
            np.where(disagree, alpha * (1 - theta) / 2, 1 - alpha),
        )
        probs += 0.5 * np.prod(kernel, axis=1)
    return JointDistribution(n, states, probs)


def _probs(dist) -> np.ndarray:
    return np.asarray(dist.probs if isinstance(dist, JointDistribution) else dist, dtype=np.float64)


def kl_divergence(P, Q) -> float:
    """sum_x P(x) ln(P(x)/Q(x)); +inf when P puts mass where Q has none."""
    p, q = _probs(P), _probs(Q)
    if p.shape != q.shape:
        raise ValueError("distributions must live on the same state space")
    support = p > 0
    if np.any(q[support] == 0):
        return math.inf
    return float(np.sum(p[support] * np.log(p[support] / q[support])))


def chi2_divergence(P, Q) -> float:
    """E_P[(P - Q)^2 / (P Q)]; +inf unless P and Q share their support."""
    p, q = _probs(P), _probs(Q)
    if p.shape != q.shape:
        raise ValueError("distributions must live on the same state space")
    live = (p + q) > 0
    if np.any(p[live] * q[live] == 0):
        return math.inf
    return float(np.sum((p[live] - q[live]) ** 2 / q[live]))


def bernoulli_kl(p: float, q: float) -> float:
    def term(x, y):
        return 0.0 if x == 0 else x * math.log(x / y)

    if (q == 0 and p > 0) or (q == 1 and p < 1):
        return math.inf
    return term(p, q) + term(1 - p, 1 - q)


# -- hard instances --------------------------------------------------------


def hard_instance_pair(kind, n: int, a: float, b: float | None = None, epsilon: float = 0.0):
    """The two indistinguishable parameter vectors behind the lower bound.

    ABS_HARD: theta = (1, a, a, 0, ...), theta' = (1 - 2e, a/(1 - 2e), a/(1 - 2e), 0, ...).
    SIGN_HARD: theta = (a, a, -a, -a, c, ...), theta' = (-a, -a, a, a, c, ...), c = b/(n-4).
    Both members are checked to satisfy A >= a and B >= b.
    """
    kind = HardKind(kind)
    if not 0.0 < a < 1.0:
        raise ValueError("a must lie in (0, 1)")
    if kind is HardKind.ABS_HARD:
        if n < 3:
            raise ValueError("the absolute-value pair needs n >= 3")
        cap = min(a, (1 - a) / 2, 0.25)
        if not 0.0 <= epsilon < cap:
            raise ValueError(f"epsilon must lie in [0, {cap:g})")
        theta = np.zeros(n)
        theta[:3] = (1.0, a, a)
        shrunk = 1 - 2 * epsilon
        theta_prime = np.zeros(n)
        theta_prime[:3] = (shrunk, a / shrunk, a / shrunk)
    else:
        if n <= 4:
            raise ValueError("the sign pair needs n > 4")
        if b is None or b <= 0:
            raise ValueError("the sign pair needs b > 0")
        c = b / (n - 4)
        if c > 1:
            raise ValueError("b / (n - 4) must not exceed 1")
        theta = np.full(n, c)
        theta[:4] = (a, a, -a, -a)
        theta_prime = theta.copy()
        theta_prime[:4] = -theta[:4]
    b_check = 0.0 if b is None else b
    for vec in (theta, theta_prime):
        if not in_hardness_class(vec, a, b_check, tol=1e-9):
            raise ValueError("hard pair left the class {A >= a, B >= b}; check a, b, epsilon")
    return as_theta(theta), as_theta(theta_prime)


def verify_lemma1(kind, n: int, a: float, b: float | None, epsilon: float, alpha: float,
                  constants=None) -> BoundReport:
    """Brute-force D(P_theta' || P_theta) against the closed-form lower-bound KL bound.

    For the absolute-value pair, zero-reliability workers are independent of the
    others and identical under both parameters, so they add nothing to the KL and
    the pair is enumerated with n = 3.
    """
    kind = HardKind(kind)
    c = _constants(constants)
    if kind is HardKind.ABS_HARD:
        n_enum = 3
        theta, theta_prime = hard_instance_pair(kind, n_enum, a, b, epsilon)
        rhs = c["kl_abs_factor"] * alpha**2 * a**4 * epsilon**2 / (1 - a)
    else:
        n_enum = n
        theta, theta_prime = hard_instance_pair(kind, n, a, b, epsilon)
        rhs = c["kl_sign_factor"] * alpha**2 * a**2 * b**2 / ((n - 4) * (1 - a) ** 4)
    P = joint_distribution(ModelParams(theta, alpha))
    P_prime = joint_distribution(ModelParams(theta_prime, alpha))
    lhs = kl_divergence(P_prime, P)
    params = dict(n=n_enum, a=a, b=b, alpha=alpha, epsilon=epsilon)
    return BoundReport(f"lemma1-{kind.value}", lhs, rhs, params)


def lemma1_grid():
    """Default sweep: every (kind, n, a, b, epsilon, alpha) point checked by acceptance."""
    a_values = [round(0.1 * k, 1) for k in range(1, 10)]
    alphas = (0.1, 0.25, 0.5, 1.0)
    for a in a_values:
        cap = min(a, (1 - a) / 2, 0.25)
        for frac in (0.1, 0.3, 0.5, 0.7, 0.9):
            for alpha in alphas:
                yield dict(kind="abs", n=3, a=a, b=None, epsilon=frac * cap, alpha=alpha)
    for n in (5, 6, 7, 8):
        for a in a_values:
            for b in (0.25, 0.5, 1.0):
                for alpha in alphas:
                    yield dict(kind="sign", n=n, a=a, b=b, epsilon=0.0, alpha=alpha)


def sweep_lemma1(grid=None, constants=None) -> list[BoundReport]:
    return [verify_lemma1(constants=constants, **point) for point in (grid or lemma1_grid())]


# -- sample complexity -----------------------------------------------------


@dataclass(frozen=True)
class Thresholds:
    T1: float
    T2: float
    T1_prime: float
    T2_prime: float

    @property
    def lower(self) -> float:
        return max(self.T1, self.T2)

    @property
    def upper(self) -> float:
        return max(self.T1_prime, self.T2_prime)


def sample_complexity_thresholds(a, b, alpha, epsilon, delta, n, constants=None) -> Thresholds:
    """Task counts below which no estimator succeeds (T1, T2) and above which TE does (T1', T2')."""
    c = _constants(constants)
    if not 0 < a < 1 or b <= 0 or not 0 < alpha <= 1 or n < 3:
        raise ValueError("need a in (0, 1), b > 0, alpha in (0, 1] and n >= 3")
    if not 0 < epsilon < min(a, (1 - a) / 2, 0.25):
        raise ValueError("lower bound needs epsilon in (0, min(a, (1-a)/2, 1/4))")
    if not 0 < epsilon < min(b / 3, 1):
        raise ValueError("upper bound needs epsilon in (0, min(b/3, 1))")
    if not 0 < delta <= 0.25:
        raise ValueError("delta must lie in (0, 1/4]")
    log_lower = math.log(1 / (4 * delta))
    T1 = (1 / c["kl_abs_factor"]) * (1 - a) / (alpha**2 * a**4 * epsilon**2) * log_lower
    T2 = 0.0
    if n > 4:
        T2 = (1 / c["kl_sign_factor"]) * (1 - a) ** 4 * (n - 4) / (alpha**2 * a**2 * b**2) * log_lower
    T1p = c["c1_prime"] / (alpha**2 * a**4 * epsilon**2) * math.log(6 * n**2 / delta)
    T2p = c["c2_prime"] * n / (alpha**2 * a**2 * b**2) * math.log(4 * n**2 / delta)
    return Thresholds(T1, T2, T1p, T2p)


# -- concentration ---------------------------------------------------------


def _binomial_se(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / trials)


def empirical_covariance_deviations(theta, alpha, t, trials, seed=0):
    """Monte Carlo draws of max_{i != j} |C^_ij - C_ij| and of the row sums
    sum_{j != i} (C^_ij - C_ij), one per independent t-task stream."""
    theta = as_theta(theta)
    n = theta.shape[0]
    cov = np.outer(theta, theta)
    off = ~np.eye(n, dtype=bool)
    rng = run_rng(seed, 0)
    p_right = alpha * (1 + theta) / 2
    max_dev = np.empty(trials)
    row_dev = np.empty((trials, n))
    chunk = max(1, 4_000_000 // max(t * n, 1))
    done = 0
    while done < trials:
        size = min(chunk, trials - done)
        # Covariances do not depend on the truth, so fix G = +1.
        u = rng.random((size, t, n))
        X = (u < p_right).astype(np.float64) - ((u >= p_right) & (u < alpha))
        M = np.matmul(X.transpose(0, 2, 1), X)
        A = np.abs(X)
        N = np.matmul(A.transpose(0, 2, 1), A)
        dev = np.where(off, M / np.maximum(N, 1) - cov, 0.0)
        max_dev[done:done + size] = np.abs(dev).max(axis=(1, 2))
        row_dev[done:done + size] = dev.sum(axis=2)
        done += size
    return max_dev, row_dev


def concentration_tail_check(theta, alpha, t, epsilon, trials, seed=0, constants=None):
    """Compare Monte Carlo tails of C^ - C with the concentration lemma.

    Returns two reports: the matrix tail P(max |C^_ij - C_ij| >= eps) against
    3 n^2 exp(-eps^2 alpha^2 t / 120), and the worst row-sum tail against the
    two-term bound with max(B^2, n).
    """
    if trials < 1000:
        raise ValueError("use at least 1000 trials")
    c = _constants(constants)
    theta = as_theta(theta)
    n = theta.shape[0]
    max_dev, row_dev = empirical_covariance_deviations(theta, alpha, t, trials, seed)
    params = dict(n=n, alpha=alpha, t=t, epsilon=epsilon, trials=trials)

    p_matrix = float(np.mean(max_dev >= epsilon))
    bound_matrix = c["matrix_tail_prefactor"] * n**2 * math.exp(
        -(epsilon**2) * alpha**2 * t / c["matrix_tail_exponent"])
    matrix = BoundReport("tail-matrix", p_matrix, bound_matrix, params,
                         slack=4 * _binomial_se(p_matrix, trials))

    p_row = float(np.max(np.mean(np.abs(row_dev) >= epsilon, axis=0)))
    B = b_functional(theta)
    bound_row = 2 * math.exp(-(epsilon**2) * alpha**2 * t / (c["row_tail_exponent"] * max(B**2, n)))
    bound_row += 2 * n * math.exp(-t * alpha**2 / (c["row_count_exponent"] * (n - 1)))
    row = BoundReport("tail-row", p_row, bound_row, params, slack=4 * _binomial_se(p_row, trials))
    return matrix, row


def chernoff_kl_inequalities(mus) -> list[tuple[float, bool, bool]]:
    """For each mu: (mu, D(2mu || mu) >= mu/2, D(mu/2 || mu) >= mu/8).

    The first inequality fails for mu below about 0.174: as mu -> 0,
    D(2mu || mu) ~ (2 ln 2 - 1) mu ~ 0.386 mu. The weaker D(2mu || mu) >= mu/3
    does hold on (0, 1/2] and is what the concentration argument needs.
    """
    out = []
    for mu in mus:
        up = bernoulli_kl(2 * mu, mu) >= mu / 2 if 2 * mu <= 1 else True
        down = bernoulli_kl(mu / 2, mu) >= mu / 8
        out.append((mu, up, down))
    return out


def chernoff_kl_reports(mus=None) -> list[BoundReport]:
    """Analytic KL lower bounds as reports (lhs = claimed lower bound, rhs = KL)."""
    mus = np.round(np.arange(0.01, 0.50, 0.01), 2) if mus is None else mus
    out = []
    for mu in mus:
        mu = float(mu)
        up = bernoulli_kl(2 * mu, mu)
        params = dict(mu=mu)
        out.append(BoundReport("chernoff-kl-up-half", mu / 2, up, params))
        out.append(BoundReport("chernoff-kl-up-third", mu / 3, up, params))
        out.append(BoundReport("chernoff-kl-down", mu / 8, bernoulli_kl(mu / 2, mu), params))
    return out


def verify_chernoff(mu, mu_prime, t, trials, seed=0) -> BoundReport:
    """Monte Carlo tail of a Binomial(t, mu) sum beyond t * mu_prime against exp(-t D(mu' || mu))."""
    if not (0 < mu < 1 and 0 < mu_prime < 1):
        raise ValueError("mu and mu_prime must lie in (0, 1)")
    rng = run_rng(seed, 0)
    sums = rng.binomial(t, mu, size=trials)
    if mu_prime >= mu:
        tail = float(np.mean(sums >= t * mu_prime))
    else:
        tail = float(np.mean(sums <= t * mu_prime))
    bound = math.exp(-t * bernoulli_kl(mu_prime, mu))
    params = dict(mu=mu, mu_prime=mu_prime, t=t, trials=trials)
    return BoundReport("tail-chernoff", tail, bound, params, slack=4 * _binomial_se(tail, trials))
