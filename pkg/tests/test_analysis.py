"""Tests for the misspecification and regret analytics."""

import math

import numpy as np
import pytest

from safebandit import (
    AlgorithmConfig,
    EpochSchedule,
    LinearChiSquaredRate,
    LinearPerArmOracle,
    TabularEnv,
    TabularModel,
    realizable_linear_env,
    run_falcon_plus,
)
from safebandit.analysis import (
    EpochSummary,
    aggregate_runs,
    average_misspecification_tabular,
    epoch_summaries,
    expected_inverse_probability,
    kernel_from_policy_distribution,
    lower_bound_instance_regret,
    lower_bound_sqrt_b_bruteforce,
    m_star,
    policy_distribution,
    policy_regret,
    policy_space,
    tabular_kernel_family,
)

RATE = LinearChiSquaredRate()


def random_kernel(rng, n_contexts, K):
    p = rng.random((n_contexts, K)) + 0.05
    return p / p.sum(axis=1, keepdims=True)


class TestDuality:
    def test_uniform_kernel_policy_mass(self):
        env = TabularEnv([[0.2, 0.8], [0.6, 0.4]])
        p = np.full((2, 2), 0.5)
        policies, Q = policy_distribution(p, env)
        assert len(policies) == 4
        np.testing.assert_allclose(Q, 0.25)

    def test_deterministic_kernel_point_mass(self):
        env = TabularEnv([[0.2, 0.8], [0.6, 0.4]])
        p = np.array([[1.0, 0.0], [0.0, 1.0]])
        policies, Q = policy_distribution(p, env)
        assert Q.sum() == pytest.approx(1.0)
        idx = int(np.argmax(Q))
        assert Q[idx] == pytest.approx(1.0)
        np.testing.assert_array_equal(policies[idx], [0, 1])

    def test_marginalization_recovers_kernel(self):
        rng = np.random.Generator(np.random.Philox(0))
        for _ in range(100):
            n_contexts = int(rng.integers(2, 5))
            K = int(rng.integers(2, 4))
            env = TabularEnv(rng.random((n_contexts, K)))
            p = random_kernel(rng, n_contexts, K)
            policies, Q = policy_distribution(p, env)
            assert Q.sum() == pytest.approx(1.0, abs=1e-12)
            back = kernel_from_policy_distribution(policies, Q, env)
            np.testing.assert_allclose(back, p, atol=1e-12)

    def test_q_expected_regret_equals_kernel_sum(self):
        rng = np.random.Generator(np.random.Philox(1))
        for _ in range(100):
            n_contexts = int(rng.integers(2, 5))
            K = int(rng.integers(2, 4))
            env = TabularEnv(rng.random((n_contexts, K)))
            table = rng.random((n_contexts, K))
            p = random_kernel(rng, n_contexts, K)
            policies, Q = policy_distribution(p, env)
            lhs = sum(q * policy_regret(table, pi, env) for pi, q in zip(policies, Q))
            best = table.max(axis=1)
            rhs = float(np.sum(env.context_probs[:, None] * p * (best[:, None] - table)))
            assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_expected_inverse_probability(self):
        env = TabularEnv([[0.2, 0.8], [0.6, 0.4]], context_probs=[0.25, 0.75])
        p = np.full((2, 2), 0.5)
        assert expected_inverse_probability(p, [0, 1], env) == pytest.approx(2.0)
        point = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert expected_inverse_probability(point, [0, 1], env) == pytest.approx(1.0)
        assert expected_inverse_probability(
            np.array([[0.5, 0.5], [0.25, 0.75]]), [1, 1], env
        ) == pytest.approx(0.25 / 0.5 + 0.75 / 0.75)
        with pytest.raises(ValueError):
            expected_inverse_probability(point, [1, 1], env)

    def test_policy_space_limit(self):
        env = TabularEnv(np.full((12, 3), 0.5))
        with pytest.raises(ValueError):
            policy_space(env)


class TestAverageMisspecification:
    def test_zero_when_realizable(self):
        env = TabularEnv([[0.2, 0.8], [0.6, 0.4]])
        models = [TabularModel(env.table), TabularModel([[0.5, 0.5], [0.5, 0.5]])]
        assert average_misspecification_tabular(env, models) == pytest.approx(0.0, abs=1e-12)

    def test_positive_when_misspecified(self):
        env = TabularEnv([[0.0, 1.0], [1.0, 0.0]])
        models = [TabularModel([[0.5, 0.5], [0.5, 0.5]])]
        b = average_misspecification_tabular(env, models)
        assert b > 0.3

    def test_requires_models(self):
        env = TabularEnv([[0.2, 0.8]])
        with pytest.raises(ValueError):
            average_misspecification_tabular(env, [])

    def test_kernel_family_rows_are_distributions(self):
        env = TabularEnv([[0.2, 0.8], [0.6, 0.4]])
        kernels = tabular_kernel_family(env, [TabularModel([[0.9, 0.1], [0.1, 0.9]])])
        for p in kernels:
            np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
            assert np.all(p >= 0)


class TestLowerBoundInstance:
    def test_equality_at_k2(self):
        # K=2, B=1/16: regret 0.25 meets the bound sqrt(KB/2) = 0.25 exactly
        assert lower_bound_instance_regret(2, 1.0 / 16, [0.5, 0.5]) == pytest.approx(0.25)

    def test_g_invariance(self):
        rng = np.random.Generator(np.random.Philox(2))
        K, B = 5, 0.02
        expected = math.sqrt((K - 1) * B)
        point_mass = np.eye(K)[2]
        assert lower_bound_instance_regret(K, B, point_mass) == pytest.approx(expected)
        for _ in range(100):
            g = rng.random(K)
            g /= g.sum()
            assert lower_bound_instance_regret(K, B, g) == pytest.approx(expected, abs=1e-12)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            lower_bound_instance_regret(1, 0.01, [1.0])
        with pytest.raises(ValueError):
            lower_bound_instance_regret(2, 0.5, [0.5, 0.5])
        with pytest.raises(ValueError):
            lower_bound_instance_regret(2, 0.01, [0.7, 0.7])

    def test_bruteforce_matches_analytic(self):
        for K in (2, 3, 5):
            for B in (0.01, 0.03, 1.0 / (2 * K)):
                brute = lower_bound_sqrt_b_bruteforce(K, B)
                assert brute == pytest.approx(math.sqrt(B), abs=1e-9)


class TestMStar:
    def test_monotone_in_b(self):
        s = EpochSchedule(2)
        dp = 0.05 / 13
        values = []
        for B in (1e-4, 1e-3, 1e-2, 0.1, 0.5):
            m = m_star(B, s, RATE, dp, m_cap=40)
            values.append(math.inf if m is None else m)
        assert values == sorted(values, reverse=True)

    def test_direct_scan_agrees(self):
        s = EpochSchedule(2)
        dp = 0.05 / 13
        B = 0.01
        expected = max(
            m
            for m in range(1, 41)
            if B <= -2.0 * math.log(dp / m**2) / (s.tau(m) - s.tau(m - 1))
        )
        assert m_star(B, s, RATE, dp, m_cap=40) == expected

    def test_sentinels(self):
        s = EpochSchedule(2)
        # tiny B: condition holds at the cap -> None ("infinite" within cap)
        assert m_star(0.0, s, RATE, 0.05 / 13, m_cap=20) is None
        # huge B: fails already at m=1 -> 0
        assert m_star(1e9, s, RATE, 0.05 / 13, m_cap=20) == 0
        with pytest.raises(ValueError):
            m_star(-0.1, s, RATE, 0.05 / 13)


class TestEpochSummaries:
    def test_counts_and_bounds(self):
        env = realizable_linear_env(2, dim=1, coefficient_seed=3)
        cfg = AlgorithmConfig(tau1=4, delta=0.05, horizon=100)
        trace = run_falcon_plus(env, LinearPerArmOracle(2, 1), cfg, seed=0)
        summaries = epoch_summaries(trace)
        assert sum(s.count for s in summaries) == 100
        assert summaries[0].first_round == 1 and summaries[0].count == 4
        assert summaries[-1].last_round == 100
        for s in summaries:
            assert s.count == s.last_round - s.first_round + 1

    def test_constant_regret_aggregation(self):
        rows = [
            [EpochSummary(m, 0, 0, 1, 0.1, 0.1) for m in (1, 2, 3)],
        ]
        agg = aggregate_runs(rows)
        for row in agg:
            assert row["mean"] == pytest.approx(0.1)
            assert row["ci_low"] == row["ci_high"] == pytest.approx(0.1)

    def test_cross_run_ci(self):
        rows = [
            [EpochSummary(1, 0, 0, 1, v, v)] for v in (0.1, 0.2, 0.3, 0.4)
        ]
        agg = aggregate_runs(rows)
        assert agg[0]["mean"] == pytest.approx(0.25)
        sem = np.std([0.1, 0.2, 0.3, 0.4], ddof=1) / 2
        assert agg[0]["ci_high"] - agg[0]["mean"] == pytest.approx(1.96 * sem)
        with pytest.raises(ValueError):
            aggregate_runs([])
