import math

import numpy as np
import pytest

from edgelab.core import GeneralizedParams, SaoParams
from edgelab.feynman_kac import (MAX_ENUM_ELEMENTS, combinatorial_constant,
                                 combined_local_times, enumerate_matchings,
                                 mc_expected_trace, trace_constant_fit,
                                 trace_covariance_check)


def _double_factorial(n):
    return math.prod(range(n, 0, -2))


class TestMatchings:
    def test_counts_are_double_factorials(self):
        for n in (0, 2, 4, 6, 8):
            got = enumerate_matchings(n)
            assert len(got) == _double_factorial(max(n - 1, 1) if n else 1)
            assert len(set(got)) == len(got)

    def test_canonical_order(self):
        for m in enumerate_matchings(6):
            firsts = [p[0] for p in m]
            assert firsts == sorted(firsts)
            assert firsts[0] == 0
            assert all(i < j for i, j in m)
            assert sorted(i for p in m for i in p) == list(range(6))

    def test_validation(self):
        with pytest.raises(ValueError):
            enumerate_matchings(3)
        with pytest.raises(ValueError):
            enumerate_matchings(MAX_ENUM_ELEMENTS + 2)


class TestCombinatorialConstant:
    def test_single_reversed_pair_is_one_for_all_beta(self):
        jumps = [(0, 1), (1, 0)]
        for beta in (1, 2, 4):
            assert combinatorial_constant(jumps, ((0, 1),), beta) == 1.0

    def test_equal_pair_by_beta(self):
        jumps = [(0, 1), (0, 1)]
        assert combinatorial_constant(jumps, ((0, 1),), 1) == 1.0
        assert combinatorial_constant(jumps, ((0, 1),), 2) == 0.0
        assert combinatorial_constant(jumps, ((0, 1),), 4) == -0.5

    def test_unrelated_pair_vanishes(self):
        jumps = [(0, 1), (1, 2)]
        for beta in (1, 2, 4):
            assert combinatorial_constant(jumps, ((0, 1),), beta) == 0.0

    def test_empty_sequence(self):
        for beta in (1, 2, 4):
            assert combinatorial_constant([], (), beta) == 1.0

    def test_bounded_by_one_on_random_walks(self, rng):
        # closed non-staying walks with random matchings, every beta
        for _ in range(500):
            r = int(rng.integers(2, 4))
            npairs = int(rng.integers(1, 4))
            nj = 2 * npairs
            while True:
                chain = [0]
                for _ in range(nj):
                    step = int(rng.integers(0, r - 1))
                    chain.append(step if step < chain[-1] else step + 1)
                if chain[-1] == chain[0]:
                    break
            jumps = [(chain[k], chain[k + 1]) for k in range(nj)]
            order = rng.permutation(nj)
            matching = tuple(tuple(sorted((int(order[2 * p]), int(order[2 * p + 1]))))
                             for p in range(npairs))
            for beta in (1, 2, 4):
                d = combinatorial_constant(jumps, matching, beta)
                assert abs(d) <= 1.0 + 1e-12

    def test_validation(self):
        with pytest.raises(ValueError):
            combinatorial_constant([(0, 1)], ((0, 0),), 2)
        with pytest.raises(ValueError):
            combinatorial_constant([(0, 1), (1, 0)], ((0, 0),), 2)
        with pytest.raises(ValueError):
            combinatorial_constant([(0, 1), (1, 0)], ((0, 1),), 3)


class TestCombinedLocalTimes:
    def test_state_fields_sum_to_total(self, rng):
        times = np.linspace(0.0, 1.0, 257)
        values = np.abs(np.cumsum(rng.standard_normal(257))) * 0.05 + 0.1
        res = combined_local_times(times, values, [0.4, 0.7], [0, 1, 0], r=2)
        np.testing.assert_array_equal(res["fields"].sum(axis=0), res["total"])
        # occupation field integrates back to the horizon
        assert res["total"].sum() * 0.01 == pytest.approx(1.0, rel=1e-12)

    def test_owner_follows_the_chain(self):
        times = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
        values = np.array([1.0, 1.1, 0.9, 1.2, 1.0])
        res = combined_local_times(times, values, [0.5], [0, 1], r=2)
        np.testing.assert_array_equal(res["owner"], [0, 0, 1, 1])
        assert res["boundary"] is None

    def test_boundary_split_with_rng(self, rng):
        times = np.linspace(0.0, 1.0, 129)
        values = 0.05 * np.sin(np.linspace(0.0, 9.0, 129)) + 0.02
        res = combined_local_times(times, values, [0.3], [1, 0], r=2, rng=rng)
        assert res["boundary"].shape == (2,)
        assert np.all(res["boundary"] >= 0.0)

    def test_validation(self):
        times = np.array([0.0, 0.5, 1.0])
        values = np.array([1.0, 1.0, 1.0])
        with pytest.raises(ValueError, match="one more state"):
            combined_local_times(times, values, [0.5], [0], r=2)
        with pytest.raises(ValueError, match="states"):
            combined_local_times(times, values, [0.5], [0, 2], r=2)
        with pytest.raises(ValueError, match="increase"):
            combined_local_times([0.0, 0.6, 0.5], values, [0.5], [0, 1], r=2)


class TestMcExpectedTrace:
    def test_deterministic_given_seed(self):
        theta = SaoParams(2, 2.0, (math.inf, math.inf))
        eta = GeneralizedParams(kappa=1.0, sigma=0.7, upsilon=0.7)
        a = mc_expected_trace(theta, eta, 0.5, n_samples=20, n_steps=256, seed=8)
        b = mc_expected_trace(theta, eta, 0.5, n_samples=20, n_steps=256, seed=8)
        assert a == b

    def test_scalar_operator_has_no_jump_orders(self):
        theta = SaoParams(1, 2.0, (math.inf,))
        eta = GeneralizedParams(kappa=1.0, sigma=1.0 / math.sqrt(2.0),
                                upsilon=1.0 / math.sqrt(2.0))
        out = mc_expected_trace(theta, eta, 0.5, n_samples=50, n_steps=256, seed=1)
        assert out["t2"] == 0.0 and out["t4plus"] == 0.0
        assert out["t0"] > 0.0
        assert out["estimate"] == pytest.approx(out["t0"])

    def test_validation(self):
        eta = GeneralizedParams(kappa=1.0, sigma=1.0, upsilon=1.0)
        with pytest.raises(ValueError, match="capped"):
            mc_expected_trace(SaoParams(4, 2.0, (0.0,) * 4), eta, 0.5,
                              n_samples=10)
        with pytest.raises(ValueError, match="horizon"):
            mc_expected_trace(SaoParams(1, 2.0, (0.0,)), eta, 1.5, n_samples=10)
        with pytest.raises(ValueError, match="samples"):
            mc_expected_trace(SaoParams(1, 2.0, (0.0,)), eta, 0.5, n_samples=1)


class TestTraceConstantFit:
    def test_single_mode_recovers_exact_curve(self):
        ts = np.geomspace(0.1, 1.0, 12)
        y = 0.8 * ts ** -1.5 + 0.35 + 0.2 * np.sqrt(ts)
        out = trace_constant_fit(ts, y, mode="single")
        assert out["leading"] == pytest.approx(0.8, abs=1e-8)
        assert out["constant"] == pytest.approx(0.35, abs=1e-8)
        assert not out["ill_conditioned"]

    def test_paired_mode_reads_the_intercept(self):
        ts = np.geomspace(0.1, 1.0, 10)
        y = 0.5 - 0.3 * ts + 0.11 * ts ** 1.5
        out = trace_constant_fit(ts, y, mode="paired")
        assert out["constant"] == pytest.approx(0.5, abs=1e-8)

    def test_bootstrap_ci_brackets_the_constant(self, rng):
        ts = np.geomspace(0.2, 1.0, 8)
        truth = 0.5 - 0.3 * ts
        rep = truth[None, :] + 0.01 * rng.standard_normal((200, 8))
        out = trace_constant_fit(ts, rep.mean(axis=0), mode="paired",
                                 replica_matrix=rep, seed=4)
        lo, hi = out["constant_ci"]
        assert lo <= 0.5 <= hi or abs(out["constant"] - 0.5) < 0.01

    def test_mode_validation(self):
        with pytest.raises(ValueError):
            trace_constant_fit([0.5, 1.0], [1.0, 2.0], mode="cubic")


class TestTraceCovarianceCheck:
    @staticmethod
    def _correlated_replicas(ts, n_rep, seed):
        # Cov(s, t) = (min/max)^(1/2): normalized covariance ratio^(-1/4),
        # strictly decreasing in log ratio
        lt = np.log(ts)
        K = np.exp(-0.5 * np.abs(lt[:, None] - lt[None, :]))
        rng = np.random.default_rng(seed)
        return rng.multivariate_normal(np.zeros(ts.size), K, size=n_rep)

    def test_decaying_covariance_passes(self):
        ts = np.geomspace(0.25, 1.0, 5)
        rep = self._correlated_replicas(ts, 4000, 0)
        out = trace_covariance_check(ts, rep, seed=0)
        assert out["slope"] < 0.0
        assert out["slope_ci_contains_nonpositive"]
        assert out["far_ratio_bounded"]
        assert out["independence_sanity"]
        assert 0.0 < out["max_normalized"] < 1.1

    def test_explicit_pairs_restrict_the_trend(self):
        ts = np.geomspace(0.25, 1.0, 5)
        rep = self._correlated_replicas(ts, 2000, 1)
        pairs = [(float(s), 1.0) for s in ts[:-1]]
        out = trace_covariance_check(ts, rep, pairs=pairs, seed=1)
        assert out["slope_ci_contains_nonpositive"]

    def test_pair_off_grid_rejected(self):
        ts = np.geomspace(0.25, 1.0, 5)
        rep = self._correlated_replicas(ts, 100, 2)
        with pytest.raises(ValueError, match="not on the horizon grid"):
            trace_covariance_check(ts, rep, pairs=[(0.3, 1.0)])
        with pytest.raises(ValueError, match="distinct"):
            trace_covariance_check(ts, rep, pairs=[(1.0, 1.0)])

    def test_too_few_replicas_rejected(self):
        ts = np.geomspace(0.25, 1.0, 5)
        with pytest.raises(ValueError, match="replicas"):
            trace_covariance_check(ts, np.zeros((4, 5)))

    def test_degenerate_matrix_raises(self):
        ts = np.geomspace(0.25, 1.0, 3)
        rep = np.random.default_rng(3).standard_normal((50, 3))
        rep[:, 1] = 2.0
        with pytest.raises(AssertionError, match="zero variance"):
            trace_covariance_check(ts, rep)
