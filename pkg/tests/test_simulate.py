import math

import numpy as np
import pytest
from scipy import stats

from crowdte.model import InvalidDimensionError, ModelParams
from crowdte.simulate import (
    InstanceKind,
    InstanceSpec,
    build_theta,
    generate_run,
    permute_theta,
    resolve_b,
    run_rng,
    sample_task,
    sample_tasks,
)


class TestInstances:
    def test_three_informative(self):
        spec = InstanceSpec("ii", n=5, a=0.55)
        np.testing.assert_array_equal(build_theta(spec), [1, 0.55, 0.55, 0, 0])

    def test_half_informative(self):
        np.testing.assert_array_equal(build_theta(InstanceSpec("i", n=4, a=0.3)), [0.3, 0.3, 0, 0])

    def test_sign_hard(self):
        spec = InstanceSpec(InstanceKind.SIGN_HARD, n=6, a=0.9, b=1.0)
        np.testing.assert_array_equal(build_theta(spec), [0.9, -0.9, 0.9, -0.9, 0.5, 0.5])

    def test_sign_hard_needs_five_workers(self):
        with pytest.raises(InvalidDimensionError):
            InstanceSpec("iii", n=4)

    def test_explicit(self):
        spec = InstanceSpec("explicit", explicit_theta=(0.1, -0.2, 0.3))
        assert spec.n == 3
        np.testing.assert_array_equal(build_theta(spec), [0.1, -0.2, 0.3])

    def test_benchmark_defaults(self):
        spec = InstanceSpec.published("iii", "sqrt-n")
        assert (spec.n, spec.t, spec.alpha, spec.a) == (50, 10_000, 0.25, 0.9)
        assert spec.b == pytest.approx(math.sqrt(50))
        assert resolve_b("2.5", 10) == 2.5

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            InstanceSpec("iv")


class TestSampling:
    def test_perfect_worker_always_right(self):
        answers, truth = sample_tasks(ModelParams([1.0, 1.0], 1.0), 500, run_rng(1))
        np.testing.assert_array_equal(answers, np.column_stack([truth, truth]))

    def test_alpha_zero_silences_everyone(self):
        answers, _ = sample_tasks(ModelParams([1.0, -0.5, 0.2], 0.0), 200, run_rng(2))
        assert not answers.any()

    def test_empty_stream(self):
        answers, truth = sample_tasks(ModelParams([0.5, 0.5, 0.5], 0.5), 0, run_rng(3))
        assert answers.shape == (0, 3) and truth.shape == (0,)

    def test_single_task(self):
        s = sample_task(ModelParams([0.5, 0.5, 0.5], 0.5), run_rng(4))
        assert s.answers.shape == (3,) and s.ground_truth in (-1, 1)

    def test_spammer_frequencies(self):
        draws = 100_000
        answers, truth = sample_tasks(ModelParams([0.0], 0.25), draws, run_rng(5))
        answered = answers[:, 0] != 0
        p = answered.mean()
        assert abs(p - 0.25) <= 3 * math.sqrt(0.25 * 0.75 / draws)
        m = int(answered.sum())
        q = (answers[answered, 0] == truth[answered]).mean()
        assert abs(q - 0.5) <= 3 * math.sqrt(0.25 / m)

    def test_moments(self):
        theta = np.array([0.9, 0.5, 0.0, -0.4, 1.0])
        alpha, t = 0.3, 100_000
        answers, truth = sample_tasks(ModelParams(theta, alpha), t, run_rng(6))
        xg = answers.astype(float) * truth[:, None]
        z = (xg.mean(axis=0) - alpha * theta) / (xg.std(axis=0, ddof=1) / math.sqrt(t))
        assert np.all(np.abs(z) <= 4)
        ab = np.abs(answers).astype(float)
        se = math.sqrt(alpha * (1 - alpha) / t)
        assert np.all(np.abs(ab.mean(axis=0) - alpha) <= 4 * se)

    def test_conditional_independence(self):
        theta = np.array([0.6, 0.3])
        answers, truth = sample_tasks(ModelParams(theta, 1.0), 100_000, run_rng(7))
        err = (answers != truth[:, None]).astype(float)
        for g in (-1, 1):
            e = err[truth == g]
            r = np.corrcoef(e[:, 0], e[:, 1])[0, 1]
            assert abs(r) <= 4 / math.sqrt(e.shape[0])

    def test_instance_moment(self):
        spec = InstanceSpec("i", n=50, t=1000, a=0.9)
        run = generate_run(spec, seed=11)
        informative = np.flatnonzero(run.theta == 0.9)
        values = run.answers[:, informative[0]].astype(float) * run.truth
        se = values.std(ddof=1) / math.sqrt(run.t)
        assert abs(values.mean() - 0.225) <= 3 * se


class TestPermutation:
    def test_identity_seed(self):
        theta = np.array([1, 2, 3])
        for seed in range(100):
            out, perm = permute_theta(theta, run_rng(seed))
            if np.array_equal(perm, [0, 1, 2]):
                np.testing.assert_array_equal(out, theta)
                break
        else:
            pytest.fail("no identity permutation among 100 seeds")

    def test_multiset_preserved(self):
        theta = np.array([0.9, -0.1, 0.0, 0.3, 0.3])
        for seed in range(20):
            out, perm = permute_theta(theta, run_rng(seed))
            np.testing.assert_array_equal(np.sort(out), np.sort(theta))
            np.testing.assert_array_equal(out, theta[perm])

    def test_uniform_position(self):
        seeds = 10_000
        counts = np.zeros(3)
        for seed in range(seeds):
            out, _ = permute_theta(np.array([1.0, 0.0, 0.0]), run_rng(seed))
            counts[int(np.argmax(out))] += 1
        chi2 = ((counts - seeds / 3) ** 2 / (seeds / 3)).sum()
        assert stats.chi2.sf(chi2, df=2) > 1e-3
        assert np.all(np.abs(counts - seeds / 3) <= 3 * math.sqrt(seeds * (1 / 3) * (2 / 3)))


class TestDeterminism:
    def test_same_seed_same_run(self):
        spec = InstanceSpec("iii", n=10, t=300, b=1.0)
        r1, r2 = generate_run(spec, 5, 3), generate_run(spec, 5, 3)
        np.testing.assert_array_equal(r1.answers, r2.answers)
        np.testing.assert_array_equal(r1.truth, r2.truth)
        np.testing.assert_array_equal(r1.theta, r2.theta)

    def test_runs_differ(self):
        spec = InstanceSpec("i", n=10, t=300)
        assert not np.array_equal(generate_run(spec, 5, 0).answers, generate_run(spec, 5, 1).answers)

    def test_samples_view(self):
        run = generate_run(InstanceSpec("i", n=6, t=4), 0)
        samples = run.samples()
        assert len(samples) == 4
        np.testing.assert_array_equal(samples[2].answers, run.answers[2])
        assert generate_run(InstanceSpec("i", n=6, t=0), 0).samples() == []

    def test_theta_is_permuted_instance(self):
        spec = InstanceSpec("ii", n=8, t=10, a=0.55)
        run = generate_run(spec, 9)
        np.testing.assert_array_equal(run.theta, build_theta(spec)[run.permutation])
