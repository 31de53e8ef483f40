"""Seeded generation of synthetic crowdsourcing runs.

All randomness flows through ``numpy.random.Generator`` backed by PCG64. A run is
identified by ``(seed, run_index)``; its stream is ``PCG64(SeedSequence([seed,
run_index]))`` so runs are reproducible across machines and independent of one
another, whatever order they execute in.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import InvalidDimensionError, ModelParams, TaskSample, as_theta


class InstanceKind(str, enum.Enum):
    HALF_INFORMATIVE = "i"
    THREE_INFORMATIVE = "ii"
    SIGN_HARD = "iii"
    EXPLICIT = "explicit"


_KIND_ALIASES = {
    "i": InstanceKind.HALF_INFORMATIVE,
    "half": InstanceKind.HALF_INFORMATIVE,
    "ii": InstanceKind.THREE_INFORMATIVE,
    "three": InstanceKind.THREE_INFORMATIVE,
    "iii": InstanceKind.SIGN_HARD,
    "sign": InstanceKind.SIGN_HARD,
    "explicit": InstanceKind.EXPLICIT,
}


def parse_kind(value) -> InstanceKind:
    if isinstance(value, InstanceKind):
        return value
    try:
        return _KIND_ALIASES[str(value).lower()]
    except KeyError:
        raise ValueError(f"unknown instance kind {value!r}") from None


@dataclass(frozen=True)
class InstanceSpec:
    kind: InstanceKind
    n: int = 50
    t: int = 1000
    alpha: float = 0.25
    a: float = 0.9
    b: float = 1.0
    explicit_theta: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", parse_kind(self.kind))
        if self.t < 0:
            raise ValueError("t must be non-negative")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.kind is InstanceKind.EXPLICIT:
            if self.explicit_theta is None:
                raise ValueError("explicit instances need explicit_theta")
            theta = as_theta(self.explicit_theta)
            object.__setattr__(self, "explicit_theta", tuple(theta.tolist()))
            object.__setattr__(self, "n", len(theta))
            return
        if not 0.0 < self.a <= 1.0:
            raise ValueError("a must lie in (0, 1]")
        if self.kind is InstanceKind.SIGN_HARD:
            if self.n <= 4:
                raise InvalidDimensionError("the sign-hard instance needs n >= 5")
            if abs(self.b / (self.n - 4)) > 1.0:
                raise ValueError("b / (n - 4) must lie in [-1, 1]")
        elif self.kind is InstanceKind.THREE_INFORMATIVE and self.n < 3:
            raise InvalidDimensionError("the three-informative instance needs n >= 3")

    @classmethod
    def published(cls, kind, value: float | str, **overrides) -> "InstanceSpec":
        """Benchmark instances from the synthetic experiments.

        ``value`` is ``a`` for instances (i) and (ii) and ``b`` for (iii); the string
        ``"sqrt-n"`` means b = sqrt(n). All three default to t = 10**4 tasks, the
        horizon at which the published tables are reproduced.
        """
        kind = parse_kind(kind)
        defaults = {
            InstanceKind.HALF_INFORMATIVE: dict(n=50, t=10_000, alpha=0.25),
            InstanceKind.THREE_INFORMATIVE: dict(n=50, t=10_000, alpha=0.25),
            InstanceKind.SIGN_HARD: dict(n=50, t=10_000, alpha=0.25, a=0.9),
        }[kind]
        defaults.update(overrides)
        if kind is InstanceKind.SIGN_HARD:
            defaults["b"] = resolve_b(value, defaults["n"])
        else:
            defaults["a"] = float(value)
        return cls(kind=kind, **defaults)


def resolve_b(value, n: int) -> float:
    if isinstance(value, str) and value.lower().replace("_", "-") in ("sqrt-n", "sqrtn"):
        return math.sqrt(n)
    return float(value)


def build_theta(spec: InstanceSpec) -> np.ndarray:
    n = spec.n
    if spec.kind is InstanceKind.EXPLICIT:
        return as_theta(spec.explicit_theta)
    theta = np.zeros(n)
    if spec.kind is InstanceKind.HALF_INFORMATIVE:
        theta[: n // 2] = spec.a
    elif spec.kind is InstanceKind.THREE_INFORMATIVE:
        theta[:3] = (1.0, spec.a, spec.a)
    else:
        theta[:4] = (spec.a, -spec.a, spec.a, -spec.a)
        theta[4:] = spec.b / (n - 4)
    return theta


def run_rng(seed: int, run_index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, run_index])))


def sample_tasks(params: ModelParams, t: int, rng: np.random.Generator):
    """Draw ``t`` i.i.d. tasks. Returns (answers (t, n) int8, truth (t,) int8).

    One uniform per (task, worker): below alpha*(1+theta)/2 the worker is right,
    below alpha it is wrong, otherwise it abstains.
    """
    truth = (2 * rng.integers(0, 2, size=t) - 1).astype(np.int8)
    u = rng.random((t, params.n))
    p_right = params.alpha * (1.0 + params.theta) / 2.0
    right = u < p_right
    wrong = ~right & (u < params.alpha)
    answers = (right.astype(np.int8) - wrong.astype(np.int8)) * truth[:, None]
    return answers, truth


def sample_task(params: ModelParams, rng: np.random.Generator) -> TaskSample:
    answers, truth = sample_tasks(params, 1, rng)
    return TaskSample(answers[0], int(truth[0]))


def permute_theta(theta, rng: np.random.Generator):
    """Shuffle the worker axis; returns (theta[perm], perm). Values are not validated."""
    theta = np.asarray(theta)
    perm = rng.permutation(theta.shape[0])
    return theta[perm], perm


@dataclass(frozen=True)
class SimulatedRun:
    theta: np.ndarray  # permuted reliabilities that generated the answers
    permutation: np.ndarray
    answers: np.ndarray  # (t, n) int8
    truth: np.ndarray  # (t,) int8
    alpha: float

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    @property
    def t(self) -> int:
        return self.answers.shape[0]

    def samples(self) -> list[TaskSample]:
        return [TaskSample(x, int(g)) for x, g in zip(self.answers, self.truth)]


def generate_run(spec: InstanceSpec, seed: int, run_index: int = 0) -> SimulatedRun:
    rng = run_rng(seed, run_index)
    theta, perm = permute_theta(build_theta(spec), rng)
    answers, truth = sample_tasks(ModelParams(theta, spec.alpha), spec.t, rng)
    return SimulatedRun(theta, perm, answers, truth, spec.alpha)
