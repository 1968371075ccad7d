import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mamt.divergence import (
    DivergenceError,
    EnumerationCapExceeded,
    StationarityReport,
    joint_bound_margin,
    joint_kl_exact,
    joint_kl_meanfield,
    joint_product,
    kl,
    others_joint_kl,
    stationarity_report,
    transition_kl,
)
from mamt.envs.tabular import TabularGame, paired_policies


def random_dist(rng, size):
    p = rng.random(size) + 1e-3
    return p / p.sum()


class TestKl:
    def test_identical_distributions(self):
        assert kl([0.5, 0.5], [0.5, 0.5]) == 0.0

    def test_two_term_value(self):
        # independent oracle: direct two-term summation
        expected = 0.5 * math.log(0.5 / 0.25) + 0.5 * math.log(0.5 / 0.75)
        assert kl([0.5, 0.5], [0.25, 0.75]) == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(0.14384103622589042, abs=1e-12)

    def test_degenerate_p(self):
        assert kl([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)

    def test_absolute_continuity_violation(self):
        with pytest.raises(DivergenceError):
            kl([0.5, 0.5], [1.0, 0.0])

    def test_support_mismatch(self):
        with pytest.raises(DivergenceError):
            kl([0.5, 0.5], [0.2, 0.3, 0.5])

    def test_rejects_non_distribution(self):
        with pytest.raises(DivergenceError):
            kl([0.9, 0.3], [0.5, 0.5])

    @given(st.integers(2, 6), st.integers(0, 10**6))
    @settings(max_examples=200, deadline=None)
    def test_nonnegative(self, size, seed):
        rng = np.random.default_rng(seed)
        p, q = random_dist(rng, size), random_dist(rng, size)
        assert kl(p, q) >= -1e-12

    @given(st.integers(2, 6), st.integers(0, 10**6))
    @settings(max_examples=100, deadline=None)
    def test_zero_iff_equal(self, size, seed):
        rng = np.random.default_rng(seed)
        p = random_dist(rng, size)
        assert kl(p, p) == pytest.approx(0.0, abs=1e-14)


class TestJointKl:
    def test_unchanged_policies(self):
        dists = [np.array([0.3, 0.7]), np.array([0.1, 0.9])]
        assert joint_kl_exact(dists, dists) == pytest.approx(0.0, abs=1e-14)

    def test_additivity_under_independence(self):
        p1, q1 = np.array([0.5, 0.5]), np.array([0.25, 0.75])
        got = joint_kl_exact([p1, p1], [q1, q1])
        # enumeration oracle: 4 joint actions summed by hand
        expected = sum(
            p1[a] * p1[b] * math.log((p1[a] * p1[b]) / (q1[a] * q1[b]))
            for a in range(2)
            for b in range(2)
        )
        assert got == pytest.approx(expected, abs=1e-14)
        assert got == pytest.approx(2 * 0.14384103622589042, abs=1e-10)

    def test_three_agent_sum(self):
        rng = np.random.default_rng(7)
        news, olds, locals_ = [], [], []
        for _ in range(3):
            p, q = random_dist(rng, 3), random_dist(rng, 3)
            news.append(p)
            olds.append(q)
            locals_.append(kl(p, q))
        assert joint_kl_exact(news, olds) == pytest.approx(sum(locals_), abs=1e-10)

    def test_enumeration_cap(self):
        dists = [np.full(10, 0.1)] * 8  # 10^8 joint actions
        with pytest.raises(EnumerationCapExceeded):
            joint_kl_exact(dists, dists)

    def test_meanfield_matches_exact_on_single_obs(self):
        rng = np.random.default_rng(3)
        news = [random_dist(rng, 2), random_dist(rng, 4), random_dist(rng, 3)]
        olds = [random_dist(rng, 2), random_dist(rng, 4), random_dist(rng, 3)]
        exact = joint_kl_exact(news, olds)
        mf = joint_kl_meanfield([d[None, :] for d in news], [d[None, :] for d in olds])
        assert mf == pytest.approx(exact, abs=1e-8)

    def test_meanfield_single_agent_degenerates_to_local(self):
        p, q = np.array([0.5, 0.5]), np.array([0.25, 0.75])
        got = joint_kl_meanfield([p[None, :]], [q[None, :]])
        assert got == pytest.approx(kl(p, q), abs=1e-14)

    def test_meanfield_empty_batch(self):
        with pytest.raises(ValueError):
            joint_kl_meanfield([np.empty((0, 2))], [np.empty((0, 2))])


class TestOthersJointKl:
    def test_two_agents_reduces_to_other_local(self):
        p1, q1 = np.array([0.6, 0.4]), np.array([0.5, 0.5])
        p2, q2 = np.array([0.5, 0.5]), np.array([0.25, 0.75])
        assert others_joint_kl([p1, p2], [q1, q2], exclude=0) == pytest.approx(
            kl(p2, q2), abs=1e-12
        )

    def test_unchanged(self):
        dists = [np.array([0.3, 0.7])] * 3
        assert others_joint_kl(dists, dists, exclude=1) == 0.0

    def test_three_agents_sum_of_two(self):
        rng = np.random.default_rng(11)
        news = [random_dist(rng, 2) for _ in range(3)]
        olds = [random_dist(rng, 2) for _ in range(3)]
        got = others_joint_kl(news, olds, exclude=2)
        assert got == pytest.approx(kl(news[0], olds[0]) + kl(news[1], olds[1]), abs=1e-10)

    def test_single_agent_is_zero(self):
        assert others_joint_kl([np.array([1.0])], [np.array([1.0])], exclude=0) == 0.0


class TestJointBoundMargin:
    def test_identical_joints(self):
        p = joint_product([np.array([0.4, 0.6]), np.array([0.2, 0.8])])
        assert joint_bound_margin(p, p) == pytest.approx(0.0, abs=1e-14)

    @given(st.integers(0, 10**6))
    @settings(max_examples=300, deadline=None)
    def test_factored_margin_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        p = joint_product([random_dist(rng, 2) for _ in range(3)])
        q = joint_product([random_dist(rng, 2) for _ in range(3)])
        assert joint_bound_margin(p, q) >= -1e-10

    @given(st.integers(0, 10**6))
    @settings(max_examples=300, deadline=None)
    def test_correlated_margin_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        p = random_dist(rng, 6).reshape(2, 3)
        q = random_dist(rng, 6).reshape(2, 3)
        assert joint_bound_margin(p, q) >= -1e-10


class TestTransitionKl:
    def test_small_m_limit(self):
        game = TabularGame()
        assert transition_kl(game, 1e-9, action=0) == pytest.approx(0.0, abs=1e-9)

    def test_half_value(self):
        # brute-force marginalization done by hand:
        # p(s1) = 0.4m + 0.2(1-m) at m = 0.5 vs m' = 0.25
        game = TabularGame()
        p = np.array([0.3, 0.7])
        q = np.array([0.25, 0.75])
        expected = float(np.sum(p * np.log(p / q)))
        assert transition_kl(game, 0.5, action=0) == pytest.approx(expected, abs=1e-14)
        assert expected == pytest.approx(0.0064014570, abs=1e-9)

    def test_dominated_by_policy_kl(self):
        game = TabularGame()
        for m in np.arange(0.05, 1.0, 0.05):
            pi, pi_old = paired_policies(m)
            for action in (0, 1):
                assert transition_kl(game, float(m), action) <= kl(pi, pi_old) + 1e-12

    def test_rejects_bad_m(self):
        game = TabularGame()
        for m in (0.0, 1.0, -0.3, 2.0):
            with pytest.raises(ValueError):
                transition_kl(game, m, action=0)


class TestStationarityReport:
    def test_constant_sequence(self):
        game = TabularGame()
        policy = [np.array([0.3, 0.7]), np.array([0.6, 0.4])]
        report = stationarity_report(game, [policy, policy, policy])
        assert np.allclose(report.delta_i, 0.0)
        assert report.delta == 0.0

    def test_paired_pair_takes_max_over_actions(self):
        game = TabularGame()
        pi, pi_old = paired_policies(0.5)
        seq = [[np.array([0.5, 0.5]), pi], [np.array([0.5, 0.5]), pi_old]]
        report = stationarity_report(game, seq)
        per_action = [transition_kl(game, 0.5, action=a) for a in (0, 1)]
        assert report.delta_i[0] == pytest.approx(max(per_action), abs=1e-14)
        # agent 1 sees no drift: agent 0's policy is constant
        assert report.delta_i[1] == pytest.approx(0.0, abs=1e-14)

    def test_system_delta_is_mean(self):
        game = TabularGame()
        seq = [
            [np.array([0.2, 0.8]), np.array([0.7, 0.3])],
            [np.array([0.4, 0.6]), np.array([0.5, 0.5])],
        ]
        report = stationarity_report(game, seq)
        assert report.delta == pytest.approx(float(np.mean(report.delta_i)), abs=1e-12)

    def test_too_short(self):
        with pytest.raises(ValueError):
            stationarity_report(TabularGame(), [[np.array([0.5, 0.5])] * 2])
